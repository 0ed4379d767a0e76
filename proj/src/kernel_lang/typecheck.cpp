#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simt/kernel_lang.hpp"

namespace simt::lang {
namespace {

struct Symbol {
  RefKind kind = RefKind::local;
  std::int32_t index = -1;  // slot or shared id
  Type type;                // locals: declared type; shared: element type
  bool shared_array = false;
};

struct BuiltinInfo {
  BuiltinFn fn;
  // Forced computation type for f-suffixed and typed helpers; void_ = none.
  Scalar forced;
};

const std::map<std::string, BuiltinInfo, std::less<>>& builtin_table() {
  static const std::map<std::string, BuiltinInfo, std::less<>> table = {
      {"__syncthreads", {BuiltinFn::syncthreads, Scalar::void_}},
      {"atomicAdd", {BuiltinFn::atomic_add, Scalar::void_}},
      {"sqrt", {BuiltinFn::sqrt, Scalar::void_}},     {"sqrtf", {BuiltinFn::sqrt, Scalar::f32}},
      {"exp", {BuiltinFn::exp, Scalar::void_}},       {"expf", {BuiltinFn::exp, Scalar::f32}},
      {"log", {BuiltinFn::log, Scalar::void_}},       {"logf", {BuiltinFn::log, Scalar::f32}},
      {"sin", {BuiltinFn::sin, Scalar::void_}},       {"sinf", {BuiltinFn::sin, Scalar::f32}},
      {"cos", {BuiltinFn::cos, Scalar::void_}},       {"cosf", {BuiltinFn::cos, Scalar::f32}},
      {"fabs", {BuiltinFn::fabs, Scalar::void_}},     {"fabsf", {BuiltinFn::fabs, Scalar::f32}},
      {"floor", {BuiltinFn::floor, Scalar::void_}},   {"floorf", {BuiltinFn::floor, Scalar::f32}},
      {"ceil", {BuiltinFn::ceil, Scalar::void_}},     {"ceilf", {BuiltinFn::ceil, Scalar::f32}},
      {"pow", {BuiltinFn::pow, Scalar::void_}},       {"powf", {BuiltinFn::pow, Scalar::f32}},
      {"fmin", {BuiltinFn::fmin, Scalar::void_}},     {"fminf", {BuiltinFn::fmin, Scalar::f32}},
      {"fmax", {BuiltinFn::fmax, Scalar::void_}},     {"fmaxf", {BuiltinFn::fmax, Scalar::f32}},
      {"min", {BuiltinFn::min, Scalar::void_}},       {"max", {BuiltinFn::max, Scalar::void_}},
      {"abs", {BuiltinFn::abs, Scalar::void_}},
      {"make_complexf", {BuiltinFn::make_complex, Scalar::c64}},
      {"make_complexd", {BuiltinFn::make_complex, Scalar::c128}},
      {"crealf", {BuiltinFn::creal, Scalar::c64}},    {"creal", {BuiltinFn::creal, Scalar::void_}},
      {"cimagf", {BuiltinFn::cimag, Scalar::c64}},    {"cimag", {BuiltinFn::cimag, Scalar::void_}},
      {"conjf", {BuiltinFn::conj, Scalar::c64}},      {"conj", {BuiltinFn::conj, Scalar::void_}},
      {"cabsf", {BuiltinFn::cabs, Scalar::c64}},      {"cabs", {BuiltinFn::cabs, Scalar::void_}},
  };
  return table;
}

int rank(Scalar s) {
  switch (s) {
    case Scalar::i32: return 1;
    case Scalar::u32: return 2;
    case Scalar::i64: return 3;
    case Scalar::f32: return 4;
    case Scalar::f64: return 5;
    default: return 0;
  }
}

// Usual arithmetic conversions over the supported scalar set. Mixing a real
// with a complex type yields the complex type with the wider real part.
Scalar common_scalar(Scalar a, Scalar b) {
  if (is_complex(a) || is_complex(b)) {
    bool wide = a == Scalar::c128 || b == Scalar::c128 || a == Scalar::f64 || b == Scalar::f64;
    return wide ? Scalar::c128 : Scalar::c64;
  }
  return rank(a) >= rank(b) ? a : b;
}

class Checker {
 public:
  explicit Checker(KernelModule m) : m_(std::move(m)) {}

  KernelModule run() {
    m_.shared.clear();
    for (std::size_t f = 0; f < m_.functions.size(); ++f) check_function(static_cast<std::int32_t>(f));
    m_.typed = true;
    return std::move(m_);
  }

 private:
  [[noreturn]] void fail(SourcePos p, const std::string& msg) const {
    throw CompileError(m_.origin, p.line, p.column, msg);
  }

  Expr& ex(NodeId id) { return m_.exprs[id]; }

  // --- scopes ---------------------------------------------------------------

  void push_scope() { scopes_.emplace_back(); }
  void pop_scope() { scopes_.pop_back(); }

  const Symbol* lookup(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return &found->second;
    }
    return nullptr;
  }

  void declare(const std::string& name, SourcePos pos, Symbol sym) {
    auto& scope = scopes_.back();
    if (scope.count(name)) fail(pos, "redeclaration of '" + name + "'");
    scope.emplace(name, sym);
  }

  void check_value_type(Type t, SourcePos pos, const char* what) {
    if (t.is_void()) fail(pos, std::string(what) + " of type void");
    if (t.pointer && t.scalar == Scalar::void_) fail(pos, "void pointers are not supported");
  }

  // --- functions --------------------------------------------------------------

  void check_function(std::int32_t index) {
    Function& fn = m_.functions[index];
    current_ = index;
    next_slot_ = 0;
    loop_depth_ = 0;
    if (fn.is_global && !fn.return_type.is_void()) {
      fail(fn.pos, "__global__ function '" + fn.name + "' must return void");
    }
    if (fn.return_type.pointer && fn.return_type.scalar == Scalar::void_) {
      fail(fn.pos, "void pointers are not supported");
    }
    scopes_.clear();
    push_scope();
    for (const Param& p : fn.params) {
      check_value_type(p.type, p.pos, "parameter");
      declare(p.name, p.pos, Symbol{RefKind::local, next_slot_++, p.type, false});
    }
    // The body block shares the parameter scope, as in C.
    Stmt& body = m_.stmts[fn.body];
    for (NodeId child : body.children) check_stmt(child);
    pop_scope();
    m_.functions[index].num_slots = next_slot_;
  }

  // --- statements -------------------------------------------------------------

  void check_condition(NodeId id) {
    Type t = check_expr(id);
    if (!is_truthy(t)) fail(ex(id).pos, "condition has type " + to_string(t) + ", expected a real scalar or pointer");
  }

  static bool is_truthy(Type t) { return t.pointer || is_real(t.scalar); }

  void check_stmt(NodeId id) {
    // `m_.stmts` is not resized during checking, so references stay valid.
    Stmt& s = m_.stmts[id];
    switch (s.kind) {
      case StmtKind::block:
        push_scope();
        for (NodeId child : s.children) check_stmt(child);
        pop_scope();
        break;
      case StmtKind::decl:
        for (Declarator& d : s.decls) {
          check_value_type(d.type, d.pos, "variable");
          if (d.init != no_node) {
            Type init = check_expr(d.init);
            require_assignable(init, d.type, ex(d.init).pos, "initialization");
          }
          d.slot = next_slot_++;
          declare(d.name, d.pos, Symbol{RefKind::local, d.slot, d.type, false});
        }
        break;
      case StmtKind::shared_decl: {
        const Declarator& d = s.decls.front();
        SharedDecl decl;
        decl.element = s.decl_type.scalar;
        decl.count = s.array_size;
        decl.dynamic = s.dynamic_shared;
        decl.function = current_;
        s.shared_id = static_cast<std::int32_t>(m_.shared.size());
        m_.shared.push_back(decl);
        declare(d.name, d.pos,
                Symbol{RefKind::shared, s.shared_id, Type::of(decl.element), decl.dynamic || decl.count > 0});
        break;
      }
      case StmtKind::expr:
        check_expr(s.expr);
        break;
      case StmtKind::if_:
        check_condition(s.expr);
        check_scoped(s.body);
        if (s.else_body != no_node) check_scoped(s.else_body);
        break;
      case StmtKind::while_:
        check_condition(s.expr);
        ++loop_depth_;
        check_scoped(s.body);
        --loop_depth_;
        break;
      case StmtKind::do_while:
        ++loop_depth_;
        check_scoped(s.body);
        --loop_depth_;
        check_condition(s.expr);
        break;
      case StmtKind::for_:
        push_scope();
        if (s.init != no_node) check_stmt(s.init);
        if (s.expr != no_node) check_condition(s.expr);
        if (s.step != no_node) check_expr(s.step);
        ++loop_depth_;
        check_scoped(s.body);
        --loop_depth_;
        pop_scope();
        break;
      case StmtKind::return_: {
        const Function& fn = m_.functions[current_];
        if (s.expr == no_node) {
          if (!fn.return_type.is_void()) fail(s.pos, "non-void function '" + fn.name + "' must return a value");
        } else {
          Type t = check_expr(s.expr);
          if (fn.return_type.is_void()) fail(ex(s.expr).pos, "void function '" + fn.name + "' cannot return a value");
          require_assignable(t, fn.return_type, ex(s.expr).pos, "return");
        }
        break;
      }
      case StmtKind::break_:
      case StmtKind::continue_:
        if (loop_depth_ == 0) {
          fail(s.pos, std::string(s.kind == StmtKind::break_ ? "break" : "continue") + " outside of a loop");
        }
        break;
      case StmtKind::empty:
        break;
    }
  }

  // Statement bodies of if/loops get their own scope even when not blocks.
  void check_scoped(NodeId id) {
    push_scope();
    check_stmt(id);
    pop_scope();
  }

  // --- conversions ------------------------------------------------------------

  void require_assignable(Type from, Type to, SourcePos pos, const char* context) {
    if (from == to) return;
    std::string msg = std::string("cannot convert ") + to_string(from) + " to " + to_string(to) + " in " + context;
    if (from.is_void() || to.is_void()) fail(pos, msg);
    if (from.pointer || to.pointer) {
      if (from.pointer && to.pointer) fail(pos, "incompatible pointer types: " + msg);
      fail(pos, msg);
    }
    if (is_complex(from.scalar) && is_real(to.scalar)) fail(pos, msg + " (complex to real)");
  }

  // --- expressions ------------------------------------------------------------

  static bool is_builtin_var(const Expr& e) { return e.kind == ExprKind::builtin_var; }

  bool is_lvalue(NodeId id) {
    const Expr& e = ex(id);
    switch (e.kind) {
      case ExprKind::ident:
        if (e.ref == RefKind::local) return true;
        if (e.ref == RefKind::shared) return !m_.shared[e.ref_index].dynamic && m_.shared[e.ref_index].count == 0;
        return false;
      case ExprKind::index:
      case ExprKind::deref:
        return true;
      default:
        return false;
    }
  }

  void require_lvalue(NodeId id, const char* what) {
    const Expr& e = ex(id);
    if (is_builtin_var(e)) fail(e.pos, std::string(what) + " to builtin variable " + spelling(e.var) + "." + static_cast<char>('x' + e.axis));
    if (!is_lvalue(id)) fail(e.pos, std::string(what) + " requires an lvalue");
  }

  Type set(NodeId id, Type t) {
    ex(id).type = t;
    return t;
  }

  Type check_expr(NodeId id) {
    Expr& e = ex(id);
    switch (e.kind) {
      case ExprKind::int_lit:
      case ExprKind::float_lit:
        return set(id, Type::of(e.literal));
      case ExprKind::ident: {
        const Symbol* sym = lookup(e.name);
        if (!sym) {
          if (m_.function_index(e.name) >= 0 || builtin_table().count(e.name)) {
            fail(e.pos, "function '" + e.name + "' used as a value");
          }
          fail(e.pos, "use of undeclared identifier '" + e.name + "'");
        }
        e.ref = sym->kind;
        e.ref_index = sym->index;
        if (sym->kind == RefKind::shared && sym->shared_array) {
          return set(id, Type::pointer_to(sym->type.scalar));
        }
        return set(id, sym->type);
      }
      case ExprKind::builtin_var:
        return set(id, Type::of(Scalar::u32));
      case ExprKind::unary:
        return check_unary(id);
      case ExprKind::binary:
        return check_binary(id);
      case ExprKind::assign:
        return check_assign(id);
      case ExprKind::ternary: {
        check_condition(e.lhs);
        Type a = check_expr(ex(id).rhs);
        Type b = check_expr(ex(id).third);
        Expr& self = ex(id);
        if (a.pointer || b.pointer) {
          if (a != b) fail(self.pos, "incompatible operand types in conditional: " + to_string(a) + " and " + to_string(b));
          self.operand_type = a;
          return set(id, a);
        }
        if (!is_arithmetic(a.scalar) || !is_arithmetic(b.scalar)) {
          fail(self.pos, "invalid operand types in conditional: " + to_string(a) + " and " + to_string(b));
        }
        Type t = Type::of(common_scalar(a.scalar, b.scalar));
        self.operand_type = t;
        return set(id, t);
      }
      case ExprKind::cast: {
        Type from = check_expr(e.lhs);
        Expr& self = ex(id);
        Type to = self.cast_type;
        if (to.pointer && to.scalar == Scalar::void_) fail(self.pos, "void pointers are not supported");
        if (to.is_void()) return set(id, to);
        if (from.is_void()) fail(self.pos, "cannot cast void value");
        if (to.pointer) {
          if (!from.pointer && !is_integer(from.scalar)) {
            fail(self.pos, "cannot cast " + to_string(from) + " to " + to_string(to));
          }
        } else if (from.pointer) {
          if (!is_integer(to.scalar)) fail(self.pos, "cannot cast " + to_string(from) + " to " + to_string(to));
        } else if (is_complex(from.scalar) && is_real(to.scalar)) {
          fail(self.pos, "cannot cast " + to_string(from) + " to " + to_string(to) + " (complex to real)");
        }
        return set(id, to);
      }
      case ExprKind::index: {
        Type base = check_expr(e.lhs);
        Type index = check_expr(ex(id).rhs);
        Expr& self = ex(id);
        if (!base.pointer) fail(self.pos, "subscripted value of type " + to_string(base) + " is not a pointer or array");
        if (index.pointer || !is_integer(index.scalar)) fail(ex(self.rhs).pos, "array subscript is not an integer");
        return set(id, Type::of(base.scalar));
      }
      case ExprKind::deref: {
        Type t = check_expr(e.lhs);
        if (!t.pointer) fail(ex(id).pos, "indirection requires a pointer operand, got " + to_string(t));
        return set(id, Type::of(t.scalar));
      }
      case ExprKind::addr_of: {
        Type t = check_expr(e.lhs);
        const Expr& operand = ex(ex(id).lhs);
        bool addressable = operand.kind == ExprKind::index || operand.kind == ExprKind::deref ||
                           (operand.kind == ExprKind::ident && operand.ref == RefKind::shared &&
                            !t.pointer);
        if (!addressable) {
          if (operand.kind == ExprKind::ident && operand.ref == RefKind::local) {
            fail(ex(id).pos, "cannot take the address of local variable '" + operand.name + "'");
          }
          fail(ex(id).pos, "cannot take the address of this expression");
        }
        return set(id, Type::pointer_to(t.scalar));
      }
      case ExprKind::pre_inc:
      case ExprKind::pre_dec:
      case ExprKind::post_inc:
      case ExprKind::post_dec: {
        Type t = check_expr(e.lhs);
        require_lvalue(ex(id).lhs, "increment or decrement");
        if (!t.pointer && !is_real(t.scalar)) {
          fail(ex(id).pos, "cannot increment or decrement a value of type " + to_string(t));
        }
        ex(id).operand_type = t;
        return set(id, t);
      }
      case ExprKind::call:
        return check_call(id);
    }
    fail(e.pos, "unsupported expression");
  }

  Type check_unary(NodeId id) {
    Type t = check_expr(ex(id).lhs);
    Expr& e = ex(id);
    switch (e.un) {
      case UnOp::neg:
      case UnOp::plus:
        if (t.pointer || !is_arithmetic(t.scalar)) {
          fail(e.pos, std::string("invalid operand to unary ") + spelling(e.un) + ": " + to_string(t));
        }
        e.operand_type = t;
        return set(id, t);
      case UnOp::log_not:
        if (!is_truthy(t)) fail(e.pos, "invalid operand to '!': " + to_string(t));
        e.operand_type = t;
        return set(id, Type::of(Scalar::i32));
      case UnOp::bit_not:
        if (t.pointer || !is_integer(t.scalar)) fail(e.pos, "invalid operand to '~': " + to_string(t));
        e.operand_type = t;
        return set(id, t);
    }
    return t;
  }

  // Result and operand types of `a op b`; shared by binary and compound
  // assignment. Returns {result, operand}.
  std::pair<Type, Type> binary_types(BinOp op, Type a, Type b, SourcePos pos) {
    auto invalid = [&]() -> std::pair<Type, Type> {
      fail(pos, std::string("invalid operands: ") + to_string(a) + " " + spelling(op) + " " + to_string(b));
    };
    if (a.is_void() || b.is_void()) invalid();
    switch (op) {
      case BinOp::add:
        if (a.pointer && b.pointer) fail(pos, "invalid operands: pointer + pointer");
        if (a.pointer && is_integer(b.scalar)) return {a, a};
        if (b.pointer && is_integer(a.scalar)) return {b, b};
        if (a.pointer || b.pointer) invalid();
        break;
      case BinOp::sub:
        if (a.pointer && b.pointer) {
          if (a != b) fail(pos, "invalid operands: pointer - pointer of different types");
          return {Type::of(Scalar::i64), a};
        }
        if (a.pointer && is_integer(b.scalar)) return {a, a};
        if (a.pointer || b.pointer) invalid();
        break;
      case BinOp::lt:
      case BinOp::le:
      case BinOp::gt:
      case BinOp::ge:
      case BinOp::eq:
      case BinOp::ne:
        if (a.pointer || b.pointer) {
          if (a != b) invalid();
          return {Type::of(Scalar::i32), a};
        }
        if (!is_arithmetic(a.scalar) || !is_arithmetic(b.scalar)) invalid();
        if ((is_complex(a.scalar) || is_complex(b.scalar)) && op != BinOp::eq && op != BinOp::ne) {
          fail(pos, "complex values are not ordered");
        }
        return {Type::of(Scalar::i32), Type::of(common_scalar(a.scalar, b.scalar))};
      case BinOp::log_and:
      case BinOp::log_or:
        if (!is_truthy(a) || !is_truthy(b)) invalid();
        return {Type::of(Scalar::i32), Type::of(Scalar::i32)};
      case BinOp::rem:
      case BinOp::bit_and:
      case BinOp::bit_or:
      case BinOp::bit_xor:
        if (a.pointer || b.pointer || !is_integer(a.scalar) || !is_integer(b.scalar)) invalid();
        break;
      case BinOp::shl:
      case BinOp::shr:
        if (a.pointer || b.pointer || !is_integer(a.scalar) || !is_integer(b.scalar)) invalid();
        return {a, a};
      case BinOp::mul:
      case BinOp::div:
        if (a.pointer || b.pointer) invalid();
        break;
    }
    if (!is_arithmetic(a.scalar) || !is_arithmetic(b.scalar)) invalid();
    Type t = Type::of(common_scalar(a.scalar, b.scalar));
    return {t, t};
  }

  Type check_binary(NodeId id) {
    Type a = check_expr(ex(id).lhs);
    Type b = check_expr(ex(id).rhs);
    Expr& e = ex(id);
    auto [result, operand] = binary_types(e.bin, a, b, e.pos);
    e.operand_type = operand;
    return set(id, result);
  }

  Type check_assign(NodeId id) {
    Type target = check_expr(ex(id).lhs);
    Type value = check_expr(ex(id).rhs);
    Expr& e = ex(id);
    require_lvalue(e.lhs, "assignment");
    if (e.compound) {
      if (e.bin == BinOp::sub && target.pointer && value.pointer) {
        fail(e.pos, "invalid operands: pointer -= pointer");
      }
      auto [result, operand] = binary_types(e.bin, target, value, e.pos);
      require_assignable(result, target, e.pos, "compound assignment");
      e.operand_type = operand;
    } else {
      require_assignable(value, target, ex(e.rhs).pos, "assignment");
      e.operand_type = target;
    }
    return set(id, target);
  }

  void expect_arity(const Expr& e, std::size_t n) {
    if (e.args.size() != n) {
      fail(e.pos, "call to '" + e.name + "' expects " + std::to_string(n) + " argument" +
                      (n == 1 ? "" : "s") + ", got " + std::to_string(e.args.size()));
    }
  }

  Type check_call(NodeId id) {
    std::vector<Type> args;
    for (NodeId a : ex(id).args) args.push_back(check_expr(a));
    Expr& e = ex(id);
    std::int32_t fn_index = m_.function_index(e.name);
    if (fn_index >= 0) {
      const Function& fn = m_.functions[fn_index];
      if (fn.is_global) fail(e.pos, "cannot call __global__ function '" + fn.name + "' from device code");
      expect_arity(e, fn.params.size());
      for (std::size_t k = 0; k < args.size(); ++k) {
        require_assignable(args[k], fn.params[k].type, ex(e.args[k]).pos,
                           ("argument " + std::to_string(k + 1) + " of '" + fn.name + "'").c_str());
      }
      e.ref = RefKind::function;
      e.ref_index = fn_index;
      return set(id, fn.return_type);
    }
    auto found = builtin_table().find(e.name);
    if (found == builtin_table().end()) fail(e.pos, "use of undeclared function '" + e.name + "'");
    e.ref = RefKind::builtin_fn;
    e.ref_index = static_cast<std::int32_t>(found->second.fn);
    return check_builtin(id, found->second, args);
  }

  Type check_builtin(NodeId id, const BuiltinInfo& info, const std::vector<Type>& args) {
    Expr& e = ex(id);
    auto arg_pos = [&](std::size_t k) { return ex(e.args[k]).pos; };
    auto real_arg = [&](std::size_t k) {
      if (args[k].pointer || !is_real(args[k].scalar)) {
        fail(arg_pos(k), "argument " + std::to_string(k + 1) + " of '" + e.name + "' must be real, got " + to_string(args[k]));
      }
    };
    auto complex_arg = [&](std::size_t k) {
      if (args[k].pointer || !is_complex(args[k].scalar)) {
        fail(arg_pos(k), "argument of '" + e.name + "' must be complex, got " + to_string(args[k]));
      }
    };
    auto finish = [&](Scalar operand, Scalar result) {
      e.operand_type = Type::of(operand);
      return set(id, Type::of(result));
    };
    switch (info.fn) {
      case BuiltinFn::syncthreads:
        expect_arity(e, 0);
        return finish(Scalar::void_, Scalar::void_);
      case BuiltinFn::atomic_add: {
        expect_arity(e, 2);
        Type p = args[0];
        if (!p.pointer || !(is_real(p.scalar))) fail(arg_pos(0), "first argument of atomicAdd must be a pointer to an integer or floating type");
        require_assignable(args[1], Type::of(p.scalar), arg_pos(1), "argument 2 of 'atomicAdd'");
        return finish(p.scalar, p.scalar);
      }
      case BuiltinFn::sqrt:
      case BuiltinFn::exp:
      case BuiltinFn::log:
      case BuiltinFn::sin:
      case BuiltinFn::cos: {
        expect_arity(e, 1);
        if (info.forced == Scalar::f32) {
          real_arg(0);
          return finish(Scalar::f32, Scalar::f32);
        }
        Scalar a = args[0].scalar;
        if (args[0].pointer || !is_arithmetic(a)) real_arg(0);
        Scalar t = is_integer(a) ? Scalar::f64 : a;
        return finish(t, t);
      }
      case BuiltinFn::fabs:
      case BuiltinFn::floor:
      case BuiltinFn::ceil: {
        expect_arity(e, 1);
        real_arg(0);
        Scalar t = info.forced == Scalar::f32 || args[0].scalar == Scalar::f32 ? Scalar::f32 : Scalar::f64;
        return finish(t, t);
      }
      case BuiltinFn::pow:
      case BuiltinFn::fmin:
      case BuiltinFn::fmax: {
        expect_arity(e, 2);
        real_arg(0);
        real_arg(1);
        bool single = info.forced == Scalar::f32 ||
                      (args[0].scalar == Scalar::f32 && args[1].scalar == Scalar::f32);
        Scalar t = single ? Scalar::f32 : Scalar::f64;
        return finish(t, t);
      }
      case BuiltinFn::min:
      case BuiltinFn::max: {
        expect_arity(e, 2);
        real_arg(0);
        real_arg(1);
        Scalar t = common_scalar(args[0].scalar, args[1].scalar);
        return finish(t, t);
      }
      case BuiltinFn::abs: {
        expect_arity(e, 1);
        Scalar a = args[0].scalar;
        if (args[0].pointer || !is_arithmetic(a)) real_arg(0);
        return finish(a, real_part(a));
      }
      case BuiltinFn::make_complex: {
        expect_arity(e, 2);
        real_arg(0);
        real_arg(1);
        return finish(real_part(info.forced), info.forced);
      }
      case BuiltinFn::creal:
      case BuiltinFn::cimag:
      case BuiltinFn::cabs: {
        expect_arity(e, 1);
        complex_arg(0);
        Scalar c = info.forced == Scalar::c64 ? Scalar::c64 : args[0].scalar;
        return finish(c, real_part(c));
      }
      case BuiltinFn::conj: {
        expect_arity(e, 1);
        complex_arg(0);
        Scalar c = info.forced == Scalar::c64 ? Scalar::c64 : args[0].scalar;
        return finish(c, c);
      }
    }
    fail(e.pos, "unsupported builtin '" + e.name + "'");
  }

  KernelModule m_;
  std::vector<std::map<std::string, Symbol>> scopes_;
  std::int32_t current_ = -1;
  std::int32_t next_slot_ = 0;
  int loop_depth_ = 0;
};

}  // namespace

KernelModule typecheck(KernelModule module) {
  if (module.typed) return module;
  return Checker(std::move(module)).run();
}

KernelModule compile(const SourceText& source, const ParseOptions& options) {
  return typecheck(parse(source, options));
}

ParamSignature entry_signature(const KernelModule& module, std::string_view name) {
  const Function* fn = module.find_function(name);
  if (!fn || !fn->is_global) throw NotFound("no __global__ entry named '" + std::string(name) + "'");
  ParamSignature sig;
  for (const Param& p : fn->params) sig.params.emplace_back(p.name, p.type);
  return sig;
}

}  // namespace simt::lang
