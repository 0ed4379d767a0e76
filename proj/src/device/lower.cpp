#include <algorithm>
#include <set>

#include "device/bytecode.hpp"

namespace simt::detail {

VT vt_of(Type t) noexcept {
  if (t.pointer) return VT::ptr;
  switch (t.scalar) {
    case Scalar::i32: return VT::i32;
    case Scalar::u32: return VT::u32;
    case Scalar::i64: return VT::i64;
    case Scalar::f32: return VT::f32;
    case Scalar::f64: return VT::f64;
    case Scalar::c64: return VT::c64;
    case Scalar::c128: return VT::c128;
    case Scalar::void_: break;
  }
  return VT::void_;
}

const EntryInfo* Program::find_entry(std::string_view name) const {
  for (const EntryInfo& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

namespace {

using namespace simt::lang;

int stack_effect(const Instr& in) {
  switch (in.op) {
    case Op::push_const:
    case Op::load_local:
    case Op::load_builtin:
    case Op::shared_addr:
    case Op::dup: return 1;
    case Op::store_local: return in.flag ? 0 : -1;
    case Op::store_mem: return in.flag ? -1 : -2;
    case Op::atomic_add:
    case Op::bin:
    case Op::cmp:
    case Op::ptr_add:
    case Op::ptr_diff:
    case Op::make_complex:
    case Op::math2:
    case Op::jump_if_false:
    case Op::jump_if_true:
    case Op::ret:
    case Op::pop: return -1;
    case Op::call: return -in.b + (in.flag ? 1 : 0);
    default: return 0;
  }
}

class Lowerer {
 public:
  explicit Lowerer(const KernelModule& m) : m_(m) {}

  Program run() {
    p_.messages.push_back("control reached the end of a non-void function");
    p_.messages.push_back("call stack overflow");
    for (std::size_t i = 0; i < m_.functions.size(); ++i) p_.functions.emplace_back();
    for (std::size_t i = 0; i < m_.functions.size(); ++i) function(static_cast<std::int32_t>(i));
    for (std::size_t i = 0; i < m_.functions.size(); ++i) {
      if (m_.functions[i].is_global) entry(static_cast<std::int32_t>(i));
    }
    return std::move(p_);
  }

 private:
  // --- emission ---------------------------------------------------------------

  std::int32_t emit(Instr in) {
    depth_ += stack_effect(in);
    max_depth_ = std::max(max_depth_, depth_);
    p_.code.push_back(in);
    return static_cast<std::int32_t>(p_.code.size() - 1);
  }
  std::int32_t emit(Op op, VT ty = VT::void_, std::int32_t a = 0) {
    Instr in{op};
    in.ty = ty;
    in.a = a;
    return emit(in);
  }
  std::int32_t here() const { return static_cast<std::int32_t>(p_.code.size()); }
  void patch(std::int32_t at, std::int32_t target) { p_.code[at].a = target; }

  void push_const(Slot s) {
    p_.constants.push_back(s);
    emit(Op::push_const, VT::void_, static_cast<std::int32_t>(p_.constants.size() - 1));
  }
  void push_i64(std::int64_t v) {
    Slot s{};
    s.i64 = v;
    push_const(s);
  }
  void push_one(Type t) {
    Slot s{};
    switch (vt_of(t)) {
      case VT::i32: s.i32 = 1; break;
      case VT::u32: s.u32 = 1; break;
      case VT::i64: s.i64 = 1; break;
      case VT::f32: s.f32 = 1.0f; break;
      case VT::f64: s.f64 = 1.0; break;
      default: s.i64 = 1; break;
    }
    push_const(s);
  }

  void convert(Type from, Type to) {
    VT a = vt_of(from);
    VT b = vt_of(to);
    if (a == b || b == VT::void_) return;
    Instr in{Op::convert};
    in.ty = a;
    in.ty2 = b;
    emit(in);
  }

  std::int32_t new_temp() { return next_temp_++; }

  // --- functions --------------------------------------------------------------

  void function(std::int32_t index) {
    const Function& fn = m_.functions[index];
    FunctionCode& code = p_.functions[index];
    code.name = fn.name;
    code.is_global = fn.is_global;
    code.entry_pc = here();
    code.num_params = static_cast<std::int32_t>(fn.params.size());
    for (const Param& prm : fn.params) code.params.push_back(vt_of(prm.type));
    fn_ = &fn;
    depth_ = 0;
    max_depth_ = 0;
    next_temp_ = fn.num_slots;
    stmt(fn.body);
    if (fn.return_type.is_void()) {
      emit(Op::ret_void);
    } else {
      emit(Op::trap, VT::void_, 0);
    }
    code.frame_slots = next_temp_;
    code.max_stack = max_depth_;
  }

  void entry(std::int32_t index) {
    EntryInfo info;
    info.name = m_.functions[index].name;
    info.function = index;
    info.signature = entry_signature(m_, info.name);
    info.shared_offsets.assign(m_.shared.size(), -1);

    std::set<std::int32_t> reachable{index};
    std::vector<std::int32_t> work{index};
    while (!work.empty()) {
      std::int32_t f = work.back();
      work.pop_back();
      const FunctionCode& code = p_.functions[f];
      std::int32_t end = f + 1 < static_cast<std::int32_t>(p_.functions.size())
                             ? p_.functions[f + 1].entry_pc
                             : static_cast<std::int32_t>(p_.code.size());
      for (std::int32_t pc = code.entry_pc; pc < end; ++pc) {
        if (p_.code[pc].op == Op::call && reachable.insert(p_.code[pc].a).second) work.push_back(p_.code[pc].a);
      }
    }

    std::uint64_t offset = 0;
    for (std::size_t k = 0; k < m_.shared.size(); ++k) {
      const SharedDecl& d = m_.shared[k];
      if (d.dynamic || !reachable.count(d.function)) continue;
      info.shared_offsets[k] = static_cast<std::int64_t>(offset);
      std::uint64_t bytes = size_of(d.element) * static_cast<std::uint64_t>(std::max<std::int64_t>(d.count, 1));
      offset = (offset + bytes + 15) & ~std::uint64_t{15};
    }
    for (std::size_t k = 0; k < m_.shared.size(); ++k) {
      const SharedDecl& d = m_.shared[k];
      if (d.dynamic && reachable.count(d.function)) info.shared_offsets[k] = static_cast<std::int64_t>(offset);
    }
    info.static_shared_bytes = static_cast<std::uint32_t>(std::min<std::uint64_t>(offset, 0xffffffffu));
    p_.entries.push_back(std::move(info));
  }

  // --- statements -------------------------------------------------------------

  struct Loop {
    std::vector<std::int32_t> breaks;
    std::vector<std::int32_t> continues;
  };

  void condition(NodeId id) {
    value(id);
    VT t = vt_of(m_.exprs[id].type);
    if (t != VT::i32) emit(Op::nonzero, t);
  }

  void stmt(NodeId id) {
    const Stmt& s = m_.stmts[id];
    switch (s.kind) {
      case StmtKind::block:
        for (NodeId c : s.children) stmt(c);
        break;
      case StmtKind::decl:
        for (const Declarator& d : s.decls) {
          if (d.init != no_node) {
            value(d.init);
            convert(m_.exprs[d.init].type, d.type);
            emit(Op::store_local, VT::void_, d.slot);
          } else {
            emit(Op::zero_local, VT::void_, d.slot);
          }
        }
        break;
      case StmtKind::shared_decl:
      case StmtKind::empty:
        break;
      case StmtKind::expr:
        effect(s.expr);
        break;
      case StmtKind::if_: {
        condition(s.expr);
        std::int32_t skip = emit(Op::jump_if_false);
        stmt(s.body);
        if (s.else_body != no_node) {
          std::int32_t over = emit(Op::jump);
          patch(skip, here());
          stmt(s.else_body);
          patch(over, here());
        } else {
          patch(skip, here());
        }
        break;
      }
      case StmtKind::while_: {
        std::int32_t top = here();
        condition(s.expr);
        std::int32_t exit = emit(Op::jump_if_false);
        loops_.emplace_back();
        stmt(s.body);
        emit(Op::jump, VT::void_, top);
        close_loop(top, here());
        patch(exit, here());
        break;
      }
      case StmtKind::do_while: {
        std::int32_t top = here();
        loops_.emplace_back();
        stmt(s.body);
        std::int32_t cont = here();
        condition(s.expr);
        emit(Op::jump_if_true, VT::void_, top);
        close_loop(cont, here());
        break;
      }
      case StmtKind::for_: {
        if (s.init != no_node) stmt(s.init);
        std::int32_t top = here();
        std::int32_t exit = -1;
        if (s.expr != no_node) {
          condition(s.expr);
          exit = emit(Op::jump_if_false);
        }
        loops_.emplace_back();
        stmt(s.body);
        std::int32_t cont = here();
        if (s.step != no_node) effect(s.step);
        emit(Op::jump, VT::void_, top);
        close_loop(cont, here());
        if (exit >= 0) patch(exit, here());
        break;
      }
      case StmtKind::return_:
        if (s.expr == no_node) {
          emit(Op::ret_void);
        } else {
          value(s.expr);
          convert(m_.exprs[s.expr].type, fn_->return_type);
          emit(Op::ret);
        }
        break;
      case StmtKind::break_:
        loops_.back().breaks.push_back(emit(Op::jump));
        break;
      case StmtKind::continue_:
        loops_.back().continues.push_back(emit(Op::jump));
        break;
    }
  }

  void close_loop(std::int32_t cont, std::int32_t exit) {
    for (std::int32_t at : loops_.back().breaks) patch(at, exit);
    for (std::int32_t at : loops_.back().continues) patch(at, cont);
    loops_.pop_back();
  }

  // --- expressions ------------------------------------------------------------

  const Expr& ex(NodeId id) const { return m_.exprs[id]; }

  void value(NodeId id) { gen(id, true); }

  void effect(NodeId id) {
    if (gen(id, false)) emit(Op::pop);
  }

  // Where an lvalue lives: a frame slot, or memory at an address computed
  // onto the stack by `address`.
  bool is_local(const Expr& e) const { return e.kind == ExprKind::ident && e.ref == RefKind::local; }

  void address(NodeId id) {
    const Expr& e = ex(id);
    switch (e.kind) {
      case ExprKind::ident:
        // Shared scalar (shared arrays are values, not lvalues).
        emit(Op::shared_addr, VT::void_, e.ref_index);
        return;
      case ExprKind::index: {
        value(e.lhs);
        value(e.rhs);
        convert(ex(e.rhs).type, Type::of(Scalar::i64));
        emit(Op::ptr_add, VT::void_, static_cast<std::int32_t>(size_of(e.type.scalar)));
        return;
      }
      case ExprKind::deref:
        value(e.lhs);
        return;
      default:
        return;
    }
  }

  // Emits code for `id`. Returns whether a value was left on the stack; when
  // `want` is false, side-effect-only forms leave nothing.
  bool gen(NodeId id, bool want) {
    const Expr& e = ex(id);
    switch (e.kind) {
      case ExprKind::int_lit: {
        Slot s{};
        switch (e.literal) {
          case Scalar::i32: s.i32 = static_cast<std::int32_t>(e.int_value); break;
          case Scalar::u32: s.u32 = static_cast<std::uint32_t>(e.int_value); break;
          default: s.i64 = static_cast<std::int64_t>(e.int_value); break;
        }
        push_const(s);
        return true;
      }
      case ExprKind::float_lit: {
        Slot s{};
        if (e.literal == Scalar::f32) {
          s.f32 = static_cast<float>(e.float_value);
        } else {
          s.f64 = e.float_value;
        }
        push_const(s);
        return true;
      }
      case ExprKind::ident:
        if (e.ref == RefKind::local) {
          emit(Op::load_local, VT::void_, e.ref_index);
        } else {
          // Shared arrays decay to their address; shared scalars are loaded.
          emit(Op::shared_addr, VT::void_, e.ref_index);
          if (!e.type.pointer) emit(Op::load_mem, vt_of(e.type));
        }
        return true;
      case ExprKind::builtin_var:
        emit(Op::load_builtin, VT::u32, static_cast<std::int32_t>(e.var) * 3 + e.axis);
        return true;
      case ExprKind::unary: {
        value(e.lhs);
        VT t = vt_of(e.operand_type);
        switch (e.un) {
          case UnOp::neg: emit(Op::neg, t); break;
          case UnOp::plus: break;
          case UnOp::log_not: emit(Op::is_zero, t); break;
          case UnOp::bit_not: emit(Op::bit_not, t); break;
        }
        return true;
      }
      case ExprKind::binary:
        binary(e);
        return true;
      case ExprKind::assign:
        assign(e, want);
        return want;
      case ExprKind::ternary: {
        condition(e.lhs);
        std::int32_t other = emit(Op::jump_if_false);
        int base = depth_;
        bool produced = gen(e.rhs, want);
        if (produced) convert(ex(e.rhs).type, e.type);
        if (produced && !want) emit(Op::pop);
        std::int32_t over = emit(Op::jump);
        depth_ = base;
        patch(other, here());
        produced = gen(e.third, want);
        if (produced) convert(ex(e.third).type, e.type);
        if (produced && !want) emit(Op::pop);
        patch(over, here());
        return want;
      }
      case ExprKind::cast:
        if (e.cast_type.is_void()) {
          effect(e.lhs);
          return false;
        }
        value(e.lhs);
        convert(ex(e.lhs).type, e.cast_type);
        return true;
      case ExprKind::index:
      case ExprKind::deref:
        address(id);
        emit(Op::load_mem, vt_of(e.type));
        return true;
      case ExprKind::addr_of:
        address(e.lhs);
        return true;
      case ExprKind::pre_inc:
      case ExprKind::pre_dec:
        step(e, e.kind == ExprKind::pre_inc, true, want);
        return want;
      case ExprKind::post_inc:
      case ExprKind::post_dec:
        step(e, e.kind == ExprKind::post_inc, false, want);
        return want;
      case ExprKind::call:
        return call(e, want);
    }
    return false;
  }

  void binary(const Expr& e) {
    const Expr& l = ex(e.lhs);
    const Expr& r = ex(e.rhs);
    if (e.bin == BinOp::log_and || e.bin == BinOp::log_or) {
      bool is_and = e.bin == BinOp::log_and;
      condition(e.lhs);
      std::int32_t shortcut = emit(is_and ? Op::jump_if_false : Op::jump_if_true);
      condition(e.rhs);
      if (vt_of(r.type) == VT::i32) emit(Op::nonzero, VT::i32);
      std::int32_t over = emit(Op::jump);
      depth_ -= 1;
      patch(shortcut, here());
      Slot s{};
      s.i32 = is_and ? 0 : 1;
      push_const(s);
      patch(over, here());
      return;
    }
    // Pointer arithmetic.
    if (l.type.pointer || r.type.pointer) {
      if (e.bin == BinOp::add || (e.bin == BinOp::sub && !r.type.pointer)) {
        const Expr& ptr = l.type.pointer ? l : r;
        NodeId ptr_id = l.type.pointer ? e.lhs : e.rhs;
        NodeId int_id = l.type.pointer ? e.rhs : e.lhs;
        value(ptr_id);
        value(int_id);
        convert(ex(int_id).type, Type::of(Scalar::i64));
        if (e.bin == BinOp::sub) emit(Op::neg, VT::i64);
        emit(Op::ptr_add, VT::void_, static_cast<std::int32_t>(size_of(ptr.type.scalar)));
        return;
      }
      if (e.bin == BinOp::sub) {
        value(e.lhs);
        value(e.rhs);
        emit(Op::ptr_diff, VT::void_, static_cast<std::int32_t>(size_of(l.type.scalar)));
        return;
      }
    }
    value(e.lhs);
    convert(l.type, e.operand_type);
    value(e.rhs);
    convert(r.type, e.operand_type);
    bool compare = e.bin == BinOp::lt || e.bin == BinOp::le || e.bin == BinOp::gt || e.bin == BinOp::ge ||
                   e.bin == BinOp::eq || e.bin == BinOp::ne;
    emit(compare ? Op::cmp : Op::bin, vt_of(e.operand_type), static_cast<std::int32_t>(e.bin));
  }

  // The value of `target op rhs`, given the current target value on the
  // stack, converted back to the target's type.
  void combine(const Expr& e, Type target) {
    const Expr& r = ex(e.rhs);
    if (target.pointer) {
      value(e.rhs);
      convert(r.type, Type::of(Scalar::i64));
      if (e.bin == BinOp::sub) emit(Op::neg, VT::i64);
      emit(Op::ptr_add, VT::void_, static_cast<std::int32_t>(size_of(target.scalar)));
      return;
    }
    convert(target, e.operand_type);
    value(e.rhs);
    convert(r.type, e.operand_type);
    emit(Op::bin, vt_of(e.operand_type), static_cast<std::int32_t>(e.bin));
    // Result type of the operation equals operand_type for arithmetic ops.
    convert(e.operand_type, target);
  }

  void store(const Expr& target, bool keep) {
    Instr in{is_local(target) ? Op::store_local : Op::store_mem};
    in.flag = keep ? 1 : 0;
    if (is_local(target)) {
      in.a = target.ref_index;
    } else {
      in.ty = vt_of(target.type);
    }
    emit(in);
  }

  void assign(const Expr& e, bool want) {
    const Expr& target = ex(e.lhs);
    Type tt = target.type;
    if (is_local(target)) {
      if (e.compound) {
        emit(Op::load_local, VT::void_, target.ref_index);
        combine(e, tt);
      } else {
        value(e.rhs);
        convert(ex(e.rhs).type, tt);
      }
      store(target, want);
      return;
    }
    address(e.lhs);
    if (e.compound) {
      emit(Op::dup);
      emit(Op::load_mem, vt_of(tt));
      combine(e, tt);
    } else {
      value(e.rhs);
      convert(ex(e.rhs).type, tt);
    }
    store(target, want);
  }

  void increment(const Expr& e, bool up) {
    Type t = e.operand_type;
    if (t.pointer) {
      push_i64(up ? 1 : -1);
      emit(Op::ptr_add, VT::void_, static_cast<std::int32_t>(size_of(t.scalar)));
      return;
    }
    push_one(t);
    emit(Op::bin, vt_of(t), static_cast<std::int32_t>(up ? BinOp::add : BinOp::sub));
  }

  void step(const Expr& e, bool up, bool prefix, bool want) {
    const Expr& target = ex(e.lhs);
    if (is_local(target)) {
      emit(Op::load_local, VT::void_, target.ref_index);
      if (!prefix && want) emit(Op::dup);
      increment(e, up);
      store(target, prefix && want);
      return;
    }
    address(e.lhs);
    emit(Op::dup);
    emit(Op::load_mem, vt_of(target.type));
    std::int32_t temp = -1;
    if (!prefix && want) {
      temp = new_temp();
      Instr keep{Op::store_local};
      keep.flag = 1;
      keep.a = temp;
      emit(keep);
    }
    increment(e, up);
    store(target, prefix && want);
    if (temp >= 0) emit(Op::load_local, VT::void_, temp);
  }

  bool call(const Expr& e, bool want) {
    if (e.ref == RefKind::function) {
      const Function& fn = m_.functions[e.ref_index];
      for (std::size_t k = 0; k < e.args.size(); ++k) {
        value(e.args[k]);
        convert(ex(e.args[k]).type, fn.params[k].type);
      }
      Instr in{Op::call};
      in.a = e.ref_index;
      in.b = static_cast<std::int32_t>(e.args.size());
      in.flag = fn.return_type.is_void() ? 0 : 1;
      emit(in);
      if (in.flag && !want) {
        emit(Op::pop);
        return false;
      }
      return in.flag != 0;
    }
    auto fn = static_cast<BuiltinFn>(e.ref_index);
    VT t = vt_of(e.operand_type);
    auto arg = [&](std::size_t k, Type to) {
      value(e.args[k]);
      convert(ex(e.args[k]).type, to);
    };
    switch (fn) {
      case BuiltinFn::syncthreads:
        emit(Op::barrier);
        return false;
      case BuiltinFn::atomic_add:
        value(e.args[0]);
        arg(1, e.operand_type);
        emit(Op::atomic_add, t);
        if (!want) {
          emit(Op::pop);
          return false;
        }
        return true;
      case BuiltinFn::make_complex:
        arg(0, e.operand_type);
        arg(1, e.operand_type);
        emit(Op::make_complex, vt_of(e.type));
        return true;
      case BuiltinFn::pow:
      case BuiltinFn::fmin:
      case BuiltinFn::fmax:
      case BuiltinFn::min:
      case BuiltinFn::max:
        arg(0, e.operand_type);
        arg(1, e.operand_type);
        emit(Op::math2, t, static_cast<std::int32_t>(fn));
        return true;
      default:
        arg(0, e.operand_type);
        emit(Op::math, t, static_cast<std::int32_t>(fn));
        return true;
    }
  }

  const KernelModule& m_;
  Program p_;
  const Function* fn_ = nullptr;
  int depth_ = 0;
  int max_depth_ = 0;
  std::int32_t next_temp_ = 0;
  std::vector<Loop> loops_;
};

}  // namespace

Program lower(const lang::KernelModule& module) {
  if (!module.typed) throw StateError("lower: module is not type-checked");
  return Lowerer(module).run();
}

}  // namespace simt::detail
