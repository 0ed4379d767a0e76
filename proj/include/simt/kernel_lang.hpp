#ifndef SIMT_KERNEL_LANG_HPP
#define SIMT_KERNEL_LANG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simt/error.hpp"
#include "simt/types.hpp"

// Front end for the C-subset kernel language: lexer, parser, type checker
// and canonical printer. Every piece of device code, user-written or
// generated, goes through here as a plain string.

namespace simt::lang {

struct SourceText {
  std::string text;
  std::string origin = "<kernel>";
};

struct SourcePos {
  int line = 1;
  int column = 1;
};

using NodeId = std::int32_t;
inline constexpr NodeId no_node = -1;

enum class ExprKind : std::uint8_t {
  int_lit,
  float_lit,
  ident,
  builtin_var,  // threadIdx.x and friends
  unary,
  binary,
  assign,       // plain or compound (`compound` set, operator in `bin`)
  ternary,
  cast,
  index,
  call,
  deref,
  addr_of,
  pre_inc,
  pre_dec,
  post_inc,
  post_dec,
};

enum class BinOp : std::uint8_t {
  add, sub, mul, div, rem, shl, shr,
  lt, le, gt, ge, eq, ne,
  bit_and, bit_xor, bit_or,
  log_and, log_or,
};

enum class UnOp : std::uint8_t { neg, plus, log_not, bit_not };

enum class BuiltinVar : std::uint8_t { thread_idx, block_idx, block_dim, grid_dim };

enum class BuiltinFn : std::uint8_t {
  syncthreads,
  atomic_add,
  sqrt, exp, log, sin, cos, fabs, floor, ceil, pow, fmin, fmax,
  min, max, abs,
  make_complex, creal, cimag, conj, cabs,
};

/// What an identifier or callee resolved to during type checking.
enum class RefKind : std::uint8_t { none, local, shared, function, builtin_fn };

const char* spelling(BinOp op) noexcept;
const char* spelling(UnOp op) noexcept;
const char* spelling(BuiltinVar v) noexcept;

struct Expr {
  ExprKind kind = ExprKind::int_lit;
  SourcePos pos;

  BinOp bin = BinOp::add;
  UnOp un = UnOp::neg;
  bool compound = false;
  // Literal payload; `literal` is the literal's own type (suffix aware).
  std::uint64_t int_value = 0;
  double float_value = 0.0;
  Scalar literal = Scalar::i32;
  std::string name;
  BuiltinVar var = BuiltinVar::thread_idx;
  std::uint8_t axis = 0;
  Type cast_type;
  NodeId lhs = no_node;
  NodeId rhs = no_node;
  NodeId third = no_node;
  std::vector<NodeId> args;

  // Filled by typecheck.
  Type type;          // type of the expression's value
  Type operand_type;  // computation type for arithmetic, comparisons and compound ops
  RefKind ref = RefKind::none;
  std::int32_t ref_index = -1;
};

enum class StmtKind : std::uint8_t {
  block,
  decl,
  shared_decl,
  expr,
  if_,
  for_,
  while_,
  do_while,
  return_,
  break_,
  continue_,
  empty,
};

struct Declarator {
  std::string name;
  SourcePos pos;
  Type type;
  NodeId init = no_node;
  std::int32_t slot = -1;  // typecheck: frame slot
};

struct Stmt {
  StmtKind kind = StmtKind::empty;
  SourcePos pos;
  std::vector<NodeId> children;     // block body
  Type decl_type;                   // shared_decl element type
  std::vector<Declarator> decls;    // decl; shared_decl uses exactly one
  std::int64_t array_size = 0;      // shared_decl: element count, 0 = scalar
  bool dynamic_shared = false;      // `extern __shared__ T name[];`
  NodeId expr = no_node;            // expr stmt, return value, loop/if condition
  NodeId init = no_node;            // for: init statement
  NodeId step = no_node;            // for: step expression
  NodeId body = no_node;
  NodeId else_body = no_node;
  std::int32_t shared_id = -1;      // typecheck: index into KernelModule::shared
};

struct Param {
  std::string name;
  Type type;
  SourcePos pos;
};

struct Function {
  bool is_global = false;
  Type return_type;
  std::string name;
  std::vector<Param> params;
  NodeId body = no_node;
  SourcePos pos;

  // Filled by typecheck. Parameters occupy slots [0, params.size()).
  std::int32_t num_slots = 0;
};

struct SharedDecl {
  Scalar element = Scalar::f32;
  std::int64_t count = 0;  // 0 = scalar
  bool dynamic = false;
  std::int32_t function = -1;
};

struct ParamSignature {
  std::vector<std::pair<std::string, Type>> params;

  std::vector<Type> types() const;
  friend bool operator==(const ParamSignature&, const ParamSignature&) = default;
};

/// A parsed translation unit. Nodes live in flat arrays and refer to each
/// other by index; functions keep declaration order.
struct KernelModule {
  std::string origin;
  std::vector<Function> functions;
  std::vector<Expr> exprs;
  std::vector<Stmt> stmts;
  std::vector<SharedDecl> shared;  // filled by typecheck
  bool typed = false;

  const Function* find_function(std::string_view name) const;
  std::int32_t function_index(std::string_view name) const;
  /// Global-qualified entry points, name → signature.
  std::map<std::string, ParamSignature> entries() const;
};

struct ParseOptions {
  /// Line number assigned to the first line of the text. Set to 0 when the
  /// text has been prefixed by a one-line wrapper.
  int first_line = 1;
};

KernelModule parse(const SourceText& source, const ParseOptions& options = {});

/// Resolves names, annotates every expression with its type and assigns
/// frame slots and shared-memory declarations. Throws CompileError.
KernelModule typecheck(KernelModule module);

/// Parse and typecheck in one step.
KernelModule compile(const SourceText& source, const ParseOptions& options = {});

/// Canonical rendering; `extern "C"` wrappers are not reproduced.
std::string pretty_print(const KernelModule& module);

ParamSignature entry_signature(const KernelModule& module, std::string_view name);

/// Structural equality: ignores source positions, origin and type
/// annotations.
bool structurally_equal(const KernelModule& a, const KernelModule& b);

/// Equality of type annotations and slot assignment (both modules typed).
bool annotations_equal(const KernelModule& a, const KernelModule& b);

}  // namespace simt::lang

#endif  // SIMT_KERNEL_LANG_HPP
