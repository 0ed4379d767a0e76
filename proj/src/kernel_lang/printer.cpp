#include <cmath>
#include <cstdio>
#include <string>

#include "simt/kernel_lang.hpp"

namespace simt::lang {
namespace {

// Binding strength used to decide where parentheses are needed.
int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::assign: return 1;
    case ExprKind::ternary: return 2;
    case ExprKind::binary:
      switch (e.bin) {
        case BinOp::log_or: return 3;
        case BinOp::log_and: return 4;
        case BinOp::bit_or: return 5;
        case BinOp::bit_xor: return 6;
        case BinOp::bit_and: return 7;
        case BinOp::eq:
        case BinOp::ne: return 8;
        case BinOp::lt:
        case BinOp::le:
        case BinOp::gt:
        case BinOp::ge: return 9;
        case BinOp::shl:
        case BinOp::shr: return 10;
        case BinOp::add:
        case BinOp::sub: return 11;
        case BinOp::mul:
        case BinOp::div:
        case BinOp::rem: return 12;
      }
      return 12;
    case ExprKind::unary:
    case ExprKind::cast:
    case ExprKind::deref:
    case ExprKind::addr_of:
    case ExprKind::pre_inc:
    case ExprKind::pre_dec: return 13;
    case ExprKind::index:
    case ExprKind::call:
    case ExprKind::post_inc:
    case ExprKind::post_dec: return 14;
    default: return 15;
  }
}

std::string type_name(Type t) {
  std::string s = c_name(t.scalar);
  if (t.pointer) s += " *";
  return s;
}

class Printer {
 public:
  explicit Printer(const KernelModule& m) : m_(m) {}

  std::string run() {
    for (std::size_t i = 0; i < m_.functions.size(); ++i) {
      if (i) out_ += "\n";
      function(m_.functions[i]);
    }
    return std::move(out_);
  }

 private:
  void line(const std::string& text) {
    out_.append(static_cast<std::size_t>(indent_) * 2, ' ');
    out_ += text;
    out_ += '\n';
  }

  void function(const Function& fn) {
    std::string head = fn.is_global ? "__global__ " : "__device__ ";
    head += declaration(fn.return_type, fn.name);
    head += "(";
    for (std::size_t k = 0; k < fn.params.size(); ++k) {
      if (k) head += ", ";
      head += declaration(fn.params[k].type, fn.params[k].name);
    }
    head += ")";
    line(head);
    stmt(fn.body);
  }

  static std::string declaration(Type t, const std::string& name) {
    if (t.pointer) return std::string(c_name(t.scalar)) + " *" + name;
    return std::string(c_name(t.scalar)) + " " + name;
  }

  std::string decl_text(const Stmt& s) const {
    std::string text;
    for (std::size_t k = 0; k < s.decls.size(); ++k) {
      const Declarator& d = s.decls[k];
      if (k == 0) {
        text = declaration(d.type, d.name);
      } else {
        text += d.type.pointer ? ", *" + d.name : ", " + d.name;
      }
      if (d.init != no_node) text += " = " + expr(d.init, 2);
    }
    return text;
  }

  // Declarators in one statement must share a base type; printing keeps the
  // first declarator's base and per-declarator stars.
  void stmt(NodeId id) {
    const Stmt& s = m_.stmts[id];
    switch (s.kind) {
      case StmtKind::block:
        line("{");
        ++indent_;
        for (NodeId c : s.children) stmt(c);
        --indent_;
        line("}");
        break;
      case StmtKind::decl:
        line(decl_text(s) + ";");
        break;
      case StmtKind::shared_decl: {
        std::string text = s.dynamic_shared ? "extern __shared__ " : "__shared__ ";
        text += std::string(c_name(s.decl_type.scalar)) + " " + s.decls.front().name;
        if (s.dynamic_shared) {
          text += "[]";
        } else if (s.array_size > 0) {
          text += "[" + std::to_string(s.array_size) + "]";
        }
        line(text + ";");
        break;
      }
      case StmtKind::expr:
        line(expr(s.expr, 0) + ";");
        break;
      case StmtKind::if_:
        line("if (" + expr(s.expr, 0) + ")");
        nested(s.body);
        if (s.else_body != no_node) {
          line("else");
          nested(s.else_body);
        }
        break;
      case StmtKind::while_:
        line("while (" + expr(s.expr, 0) + ")");
        nested(s.body);
        break;
      case StmtKind::do_while:
        line("do");
        nested(s.body);
        line("while (" + expr(s.expr, 0) + ");");
        break;
      case StmtKind::for_: {
        std::string init;
        if (s.init != no_node) {
          const Stmt& is = m_.stmts[s.init];
          init = is.kind == StmtKind::decl ? decl_text(is) : expr(is.expr, 0);
        }
        std::string cond = s.expr != no_node ? " " + expr(s.expr, 0) : "";
        std::string step = s.step != no_node ? " " + expr(s.step, 0) : "";
        line("for (" + init + ";" + cond + ";" + step + ")");
        nested(s.body);
        break;
      }
      case StmtKind::return_:
        line(s.expr == no_node ? "return;" : "return " + expr(s.expr, 0) + ";");
        break;
      case StmtKind::break_:
        line("break;");
        break;
      case StmtKind::continue_:
        line("continue;");
        break;
      case StmtKind::empty:
        line(";");
        break;
    }
  }

  // Non-block bodies are indented one level; blocks print at the same level.
  void nested(NodeId id) {
    if (m_.stmts[id].kind == StmtKind::block) {
      stmt(id);
    } else {
      ++indent_;
      stmt(id);
      --indent_;
    }
  }

  static std::string float_literal(double v, Scalar s) {
    char buf[64];
    if (s == Scalar::f32) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", v);
    }
    std::string text = buf;
    if (text.find_first_of(".e") == std::string::npos) text += ".0";
    if (text.find("inf") != std::string::npos) text = s == Scalar::f32 ? "1e39" : "1e309";
    if (s == Scalar::f32) text += "f";
    return text;
  }

  static std::string int_literal(std::uint64_t v, Scalar s) {
    std::string text = std::to_string(v);
    if (s == Scalar::u32) {
      text += "u";
    } else if (s == Scalar::i64 && v <= 0x7fffffffULL) {
      text += "LL";
    }
    return text;
  }

  // Renders `id`, parenthesized when it binds looser than `min_prec`.
  std::string expr(NodeId id, int min_prec) const {
    const Expr& e = m_.exprs[id];
    std::string text = render(e);
    if (precedence(e) < min_prec) return "(" + text + ")";
    return text;
  }

  std::string render(const Expr& e) const {
    int p = precedence(e);
    switch (e.kind) {
      case ExprKind::int_lit: return int_literal(e.int_value, e.literal);
      case ExprKind::float_lit: return float_literal(e.float_value, e.literal);
      case ExprKind::ident: return e.name;
      case ExprKind::builtin_var:
        return std::string(spelling(e.var)) + "." + static_cast<char>('x' + e.axis);
      case ExprKind::unary: {
        std::string operand = expr(e.lhs, p);
        // Keep `- -x` and `+ +x` from fusing into `--x` / `++x`.
        std::string op = spelling(e.un);
        if (!operand.empty() && (operand[0] == '-' || operand[0] == '+')) op += " ";
        return op + operand;
      }
      case ExprKind::binary:
        return expr(e.lhs, p) + " " + spelling(e.bin) + " " + expr(e.rhs, p + 1);
      case ExprKind::assign: {
        std::string op = e.compound ? std::string(spelling(e.bin)) + "=" : "=";
        return expr(e.lhs, p + 1) + " " + op + " " + expr(e.rhs, p);
      }
      case ExprKind::ternary:
        return expr(e.lhs, p + 1) + " ? " + expr(e.rhs, 0) + " : " + expr(e.third, p);
      case ExprKind::cast:
        return "(" + type_name(e.cast_type) + ")" + expr(e.lhs, p);
      case ExprKind::index:
        return expr(e.lhs, p) + "[" + expr(e.rhs, 0) + "]";
      case ExprKind::call: {
        std::string text = e.name + "(";
        for (std::size_t k = 0; k < e.args.size(); ++k) {
          if (k) text += ", ";
          text += expr(e.args[k], 2);
        }
        return text + ")";
      }
      case ExprKind::deref: return "*" + expr(e.lhs, p);
      case ExprKind::addr_of: return "&" + expr(e.lhs, p);
      case ExprKind::pre_inc: return "++" + expr(e.lhs, p);
      case ExprKind::pre_dec: return "--" + expr(e.lhs, p);
      case ExprKind::post_inc: return expr(e.lhs, p) + "++";
      case ExprKind::post_dec: return expr(e.lhs, p) + "--";
    }
    return "?";
  }

  const KernelModule& m_;
  std::string out_;
  int indent_ = 0;
};

}  // namespace

std::string pretty_print(const KernelModule& module) { return Printer(module).run(); }

}  // namespace simt::lang
