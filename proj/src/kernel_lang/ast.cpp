#include <cstring>

#include "simt/kernel_lang.hpp"

namespace simt {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::compile: return "CompileError";
    case ErrorKind::init: return "InitError";
    case ErrorKind::argument: return "ArgumentError";
    case ErrorKind::invalid_launch_config: return "InvalidLaunchConfig";
    case ErrorKind::out_of_bounds: return "OutOfBounds";
    case ErrorKind::misaligned_access: return "MisalignedAccess";
    case ErrorKind::barrier_divergence: return "BarrierDivergence";
    case ErrorKind::trap: return "Trap";
    case ErrorKind::memory: return "MemoryError";
    case ErrorKind::not_found: return "NotFound";
    case ErrorKind::state: return "StateError";
    case ErrorKind::format: return "FormatError";
    case ErrorKind::shape: return "ShapeError";
    case ErrorKind::dtype: return "DTypeError";
    case ErrorKind::substitution: return "SubstitutionError";
    case ErrorKind::tune: return "TuneError";
    case ErrorKind::index: return "IndexError";
    case ErrorKind::io: return "IoError";
  }
  return "Error";
}

CompileError::CompileError(std::string origin, int line, int column, std::string message)
    : Error(ErrorKind::compile,
            origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      origin_(std::move(origin)),
      line_(line),
      column_(column),
      message_(std::move(message)) {}

const char* to_string(Scalar s) noexcept {
  switch (s) {
    case Scalar::void_: return "void";
    case Scalar::i32: return "i32";
    case Scalar::u32: return "u32";
    case Scalar::i64: return "i64";
    case Scalar::f32: return "f32";
    case Scalar::f64: return "f64";
    case Scalar::c64: return "c64";
    case Scalar::c128: return "c128";
  }
  return "?";
}

const char* c_name(Scalar s) noexcept {
  switch (s) {
    case Scalar::void_: return "void";
    case Scalar::i32: return "int";
    case Scalar::u32: return "unsigned int";
    case Scalar::i64: return "long long";
    case Scalar::f32: return "float";
    case Scalar::f64: return "double";
    case Scalar::c64: return "complexf";
    case Scalar::c128: return "complexd";
  }
  return "?";
}

std::string to_string(Type t) {
  std::string s = c_name(t.scalar);
  if (t.pointer) s += " *";
  return s;
}

std::string to_string(Dim3 d) {
  return "(" + std::to_string(d.x) + "," + std::to_string(d.y) + "," + std::to_string(d.z) + ")";
}

const char* to_string(ArgTag tag) noexcept {
  switch (tag) {
    case ArgTag::i32: return "I32";
    case ArgTag::u32: return "U32";
    case ArgTag::i64: return "I64";
    case ArgTag::f32: return "F32";
    case ArgTag::f64: return "F64";
    case ArgTag::c64: return "C64";
    case ArgTag::c128: return "C128";
    case ArgTag::ptr: return "Ptr";
  }
  return "?";
}

ArgTag tag_for(Type t) noexcept {
  if (t.pointer) return ArgTag::ptr;
  switch (t.scalar) {
    case Scalar::i32: return ArgTag::i32;
    case Scalar::u32: return ArgTag::u32;
    case Scalar::i64: return ArgTag::i64;
    case Scalar::f32: return ArgTag::f32;
    case Scalar::f64: return ArgTag::f64;
    case Scalar::c64: return ArgTag::c64;
    case Scalar::c128: return ArgTag::c128;
    case Scalar::void_: break;
  }
  return ArgTag::ptr;
}

}  // namespace simt

namespace simt::lang {

const char* spelling(BinOp op) noexcept {
  switch (op) {
    case BinOp::add: return "+";
    case BinOp::sub: return "-";
    case BinOp::mul: return "*";
    case BinOp::div: return "/";
    case BinOp::rem: return "%";
    case BinOp::shl: return "<<";
    case BinOp::shr: return ">>";
    case BinOp::lt: return "<";
    case BinOp::le: return "<=";
    case BinOp::gt: return ">";
    case BinOp::ge: return ">=";
    case BinOp::eq: return "==";
    case BinOp::ne: return "!=";
    case BinOp::bit_and: return "&";
    case BinOp::bit_xor: return "^";
    case BinOp::bit_or: return "|";
    case BinOp::log_and: return "&&";
    case BinOp::log_or: return "||";
  }
  return "?";
}

const char* spelling(UnOp op) noexcept {
  switch (op) {
    case UnOp::neg: return "-";
    case UnOp::plus: return "+";
    case UnOp::log_not: return "!";
    case UnOp::bit_not: return "~";
  }
  return "?";
}

const char* spelling(BuiltinVar v) noexcept {
  switch (v) {
    case BuiltinVar::thread_idx: return "threadIdx";
    case BuiltinVar::block_idx: return "blockIdx";
    case BuiltinVar::block_dim: return "blockDim";
    case BuiltinVar::grid_dim: return "gridDim";
  }
  return "?";
}

std::vector<Type> ParamSignature::types() const {
  std::vector<Type> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.second);
  return out;
}

const Function* KernelModule::find_function(std::string_view name) const {
  std::int32_t i = function_index(name);
  return i < 0 ? nullptr : &functions[i];
}

std::int32_t KernelModule::function_index(std::string_view name) const {
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (functions[i].name == name) return static_cast<std::int32_t>(i);
  }
  return -1;
}

std::map<std::string, ParamSignature> KernelModule::entries() const {
  std::map<std::string, ParamSignature> out;
  for (const Function& fn : functions) {
    if (!fn.is_global) continue;
    ParamSignature sig;
    for (const Param& p : fn.params) sig.params.emplace_back(p.name, p.type);
    out.emplace(fn.name, std::move(sig));
  }
  return out;
}

// --- structural comparison ---------------------------------------------------

namespace {

class Comparer {
 public:
  Comparer(const KernelModule& a, const KernelModule& b, bool annotations)
      : a_(a), b_(b), annotations_(annotations) {}

  bool modules() const {
    if (a_.functions.size() != b_.functions.size()) return false;
    for (std::size_t i = 0; i < a_.functions.size(); ++i) {
      const Function& fa = a_.functions[i];
      const Function& fb = b_.functions[i];
      if (fa.is_global != fb.is_global || fa.return_type != fb.return_type || fa.name != fb.name) return false;
      if (fa.params.size() != fb.params.size()) return false;
      for (std::size_t k = 0; k < fa.params.size(); ++k) {
        if (fa.params[k].name != fb.params[k].name || fa.params[k].type != fb.params[k].type) return false;
      }
      if (annotations_ && fa.num_slots != fb.num_slots) return false;
      if (!stmt(fa.body, fb.body)) return false;
    }
    if (annotations_) {
      if (a_.typed != b_.typed || a_.shared.size() != b_.shared.size()) return false;
      for (std::size_t i = 0; i < a_.shared.size(); ++i) {
        const SharedDecl& x = a_.shared[i];
        const SharedDecl& y = b_.shared[i];
        if (x.element != y.element || x.count != y.count || x.dynamic != y.dynamic || x.function != y.function) {
          return false;
        }
      }
    }
    return true;
  }

 private:
  bool stmt(NodeId x, NodeId y) const {
    if (x == no_node || y == no_node) return x == y;
    const Stmt& s = a_.stmts[x];
    const Stmt& t = b_.stmts[y];
    if (s.kind != t.kind || s.children.size() != t.children.size() || s.decls.size() != t.decls.size()) {
      return false;
    }
    if (s.kind == StmtKind::shared_decl &&
        (s.decl_type != t.decl_type || s.array_size != t.array_size || s.dynamic_shared != t.dynamic_shared)) {
      return false;
    }
    if (annotations_ && s.shared_id != t.shared_id) return false;
    for (std::size_t k = 0; k < s.children.size(); ++k) {
      if (!stmt(s.children[k], t.children[k])) return false;
    }
    for (std::size_t k = 0; k < s.decls.size(); ++k) {
      const Declarator& d = s.decls[k];
      const Declarator& e = t.decls[k];
      if (d.name != e.name || d.type != e.type || !expr(d.init, e.init)) return false;
      if (annotations_ && d.slot != e.slot) return false;
    }
    return expr(s.expr, t.expr) && stmt(s.init, t.init) && expr(s.step, t.step) && stmt(s.body, t.body) &&
           stmt(s.else_body, t.else_body);
  }

  bool expr(NodeId x, NodeId y) const {
    if (x == no_node || y == no_node) return x == y;
    const Expr& e = a_.exprs[x];
    const Expr& f = b_.exprs[y];
    if (e.kind != f.kind || e.args.size() != f.args.size()) return false;
    switch (e.kind) {
      case ExprKind::int_lit:
        if (e.int_value != f.int_value || e.literal != f.literal) return false;
        break;
      case ExprKind::float_lit:
        if (e.literal != f.literal) return false;
        // Compare bit patterns so that NaN payloads and signed zero count.
        if (std::memcmp(&e.float_value, &f.float_value, sizeof(double)) != 0) return false;
        break;
      case ExprKind::ident:
      case ExprKind::call:
        if (e.name != f.name) return false;
        break;
      case ExprKind::builtin_var:
        if (e.var != f.var || e.axis != f.axis) return false;
        break;
      case ExprKind::unary:
        if (e.un != f.un) return false;
        break;
      case ExprKind::binary:
        if (e.bin != f.bin) return false;
        break;
      case ExprKind::assign:
        if (e.compound != f.compound || (e.compound && e.bin != f.bin)) return false;
        break;
      case ExprKind::cast:
        if (e.cast_type != f.cast_type) return false;
        break;
      default:
        break;
    }
    if (annotations_ &&
        (e.type != f.type || e.operand_type != f.operand_type || e.ref != f.ref || e.ref_index != f.ref_index)) {
      return false;
    }
    for (std::size_t k = 0; k < e.args.size(); ++k) {
      if (!expr(e.args[k], f.args[k])) return false;
    }
    return expr(e.lhs, f.lhs) && expr(e.rhs, f.rhs) && expr(e.third, f.third);
  }

  const KernelModule& a_;
  const KernelModule& b_;
  bool annotations_;
};

}  // namespace

bool structurally_equal(const KernelModule& a, const KernelModule& b) {
  return Comparer(a, b, false).modules();
}

bool annotations_equal(const KernelModule& a, const KernelModule& b) {
  return Comparer(a, b, true).modules();
}

}  // namespace simt::lang
