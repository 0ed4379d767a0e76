#include <optional>
#include <set>

#include "kernel_lang/lexer.hpp"
#include "simt/kernel_lang.hpp"

namespace simt::lang {
namespace {

using detail::Tok;
using detail::Token;

class Parser {
 public:
  Parser(const SourceText& src, const ParseOptions& options)
      : origin_(src.origin), tokens_(detail::tokenize(src, options.first_line)) {
    module_.origin = src.origin;
  }

  KernelModule run() {
    while (peek().kind != Tok::eof) item();
    std::set<std::string> seen;
    for (const auto& fn : module_.functions) {
      if (!seen.insert(fn.name).second) {
        fail(fn.pos, "redefinition of function '" + fn.name + "'");
      }
    }
    return std::move(module_);
  }

 private:
  // --- token helpers -------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(cursor_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  const Token& next() {
    const Token& t = tokens_[cursor_];
    if (cursor_ + 1 < tokens_.size()) ++cursor_;
    return t;
  }
  bool accept_punct(std::string_view p) {
    if (peek().is_punct(p)) {
      next();
      return true;
    }
    return false;
  }
  bool accept_keyword(std::string_view k) {
    if (peek().is_keyword(k)) {
      next();
      return true;
    }
    return false;
  }
  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::eof: return "end of input";
      case Tok::string_lit: return "string literal";
      case Tok::int_lit:
      case Tok::float_lit: return "'" + t.text + "'";
      default: return "'" + t.text + "'";
    }
  }
  const Token& expect_punct(std::string_view p) {
    if (!peek().is_punct(p)) {
      fail(peek().pos, "expected '" + std::string(p) + "' before " + describe(peek()));
    }
    return next();
  }
  std::string expect_ident(const char* what) {
    if (peek().kind != Tok::ident) {
      fail(peek().pos, std::string("expected ") + what + " before " + describe(peek()));
    }
    return next().text;
  }
  [[noreturn]] void fail(SourcePos p, const std::string& msg) const {
    throw CompileError(origin_, p.line, p.column, msg);
  }

  NodeId add_expr(Expr e) {
    module_.exprs.push_back(std::move(e));
    return static_cast<NodeId>(module_.exprs.size() - 1);
  }
  NodeId add_stmt(Stmt s) {
    module_.stmts.push_back(std::move(s));
    return static_cast<NodeId>(module_.stmts.size() - 1);
  }

  // --- types ---------------------------------------------------------------

  static bool is_cv(const Token& t) {
    return t.is_keyword("const") || t.is_keyword("volatile") || t.is_keyword("__restrict__");
  }

  bool starts_type(std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    if (t.kind == Tok::ident && t.text == "pycuda" && peek(ahead + 1).is_punct("::")) return true;
    if (t.kind != Tok::keyword) return false;
    static const std::set<std::string, std::less<>> kTypeWords = {
        "void", "int", "unsigned", "signed", "long", "short", "char", "float",
        "double", "complexf", "complexd", "bool", "const", "volatile"};
    return kTypeWords.count(t.text) != 0;
  }

  Scalar base_type() {
    while (is_cv(peek())) next();
    const Token& t = peek();
    SourcePos pos = t.pos;
    if (t.kind == Tok::ident && t.text == "pycuda") {
      next();
      expect_punct("::");
      if (peek().kind != Tok::ident || peek().text != "complex") {
        fail(peek().pos, "expected 'complex' after 'pycuda::'");
      }
      next();
      expect_punct("<");
      Scalar s;
      if (accept_keyword("float")) {
        s = Scalar::c64;
      } else if (accept_keyword("double")) {
        s = Scalar::c128;
      } else {
        fail(peek().pos, "pycuda::complex requires float or double");
      }
      expect_punct(">");
      return s;
    }
    if (t.kind != Tok::keyword) fail(pos, "expected type before " + describe(t));
    std::string w = t.text;
    if (w == "char" || w == "short" || w == "bool") fail(pos, "unsupported type '" + w + "'");
    if (w == "void") { next(); return Scalar::void_; }
    if (w == "float") { next(); return Scalar::f32; }
    if (w == "double") { next(); return Scalar::f64; }
    if (w == "complexf") { next(); return Scalar::c64; }
    if (w == "complexd") { next(); return Scalar::c128; }
    if (w == "int") { next(); return Scalar::i32; }
    if (w == "signed" || w == "unsigned") {
      bool is_unsigned = w == "unsigned";
      next();
      if (peek().is_keyword("char") || peek().is_keyword("short")) {
        fail(peek().pos, "unsupported type '" + w + " " + peek().text + "'");
      }
      if (peek().is_keyword("long")) {
        next();
        accept_keyword("long");
        accept_keyword("int");
        if (is_unsigned) fail(pos, "unsupported type: unsigned 64-bit integer");
        return Scalar::i64;
      }
      accept_keyword("int");
      return is_unsigned ? Scalar::u32 : Scalar::i32;
    }
    if (w == "long") {
      next();
      if (peek().is_keyword("double")) fail(pos, "unsupported type 'long double'");
      accept_keyword("long");
      accept_keyword("int");
      return Scalar::i64;
    }
    fail(pos, "expected type before " + describe(t));
  }

  // Parses pointer declarator stars after a base type.
  Type pointer_suffix(Scalar base) {
    while (is_cv(peek())) next();
    Type type = Type::of(base);
    if (peek().is_punct("*")) {
      next();
      type.pointer = true;
      while (is_cv(peek())) next();
      if (peek().is_punct("*")) fail(peek().pos, "pointer-to-pointer is not supported");
    }
    return type;
  }

  // --- top level -------------------------------------------------------------

  void item() {
    if (peek().is_keyword("extern")) {
      next();
      if (peek().kind != Tok::string_lit) {
        fail(peek().pos, "expected string literal after 'extern' at file scope");
      }
      const Token& lang = next();
      if (lang.text != "C") fail(lang.pos, "unsupported linkage \"" + lang.text + "\"");
      if (accept_punct("{")) {
        while (!peek().is_punct("}")) {
          if (peek().kind == Tok::eof) fail(peek().pos, "expected '}' to close extern \"C\" block");
          item();
        }
        next();
        return;
      }
      function();
      return;
    }
    function();
  }

  void function() {
    Function fn;
    fn.pos = peek().pos;
    bool qualified = false;
    while (true) {
      if (accept_keyword("__global__")) {
        fn.is_global = true;
        qualified = true;
      } else if (accept_keyword("__device__")) {
        qualified = true;
      } else if (accept_keyword("inline") || accept_keyword("__forceinline__") ||
                 accept_keyword("static")) {
      } else {
        break;
      }
    }
    if (peek().is_keyword("__shared__")) fail(peek().pos, "__shared__ variables must be declared inside a function");
    if (!starts_type()) fail(peek().pos, "expected function definition before " + describe(peek()));
    Scalar base = base_type();
    fn.return_type = pointer_suffix(base);
    SourcePos name_pos = peek().pos;
    fn.name = expect_ident("function name");
    if (!peek().is_punct("(")) {
      fail(name_pos, "file-scope variables are not supported");
    }
    if (!qualified) {
      fail(fn.pos, "function '" + fn.name + "' must be declared __global__ or __device__");
    }
    fn.pos = name_pos;
    expect_punct("(");
    if (peek().is_keyword("void") && peek(1).is_punct(")")) {
      next();
    }
    if (!peek().is_punct(")")) {
      while (true) {
        Param p;
        p.pos = peek().pos;
        if (!starts_type()) fail(peek().pos, "expected parameter type before " + describe(peek()));
        Scalar pb = base_type();
        p.type = pointer_suffix(pb);
        p.name = expect_ident("parameter name");
        if (peek().is_punct("[")) fail(peek().pos, "aggregate parameters are not supported");
        fn.params.push_back(std::move(p));
        if (!accept_punct(",")) break;
      }
    }
    expect_punct(")");
    if (peek().is_punct(";")) fail(peek().pos, "function declarations without a body are not supported");
    if (!peek().is_punct("{")) fail(peek().pos, "expected '{' before " + describe(peek()));
    fn.body = block();
    module_.functions.push_back(std::move(fn));
  }

  // --- statements -------------------------------------------------------------

  NodeId block() {
    Stmt s;
    s.kind = StmtKind::block;
    s.pos = expect_punct("{").pos;
    while (!peek().is_punct("}")) {
      if (peek().kind == Tok::eof) fail(peek().pos, "expected '}' before end of input");
      s.children.push_back(statement());
    }
    next();
    return add_stmt(std::move(s));
  }

  NodeId statement() {
    const Token& t = peek();
    SourcePos pos = t.pos;
    if (t.is_punct("{")) return block();
    if (t.is_punct(";")) {
      next();
      Stmt s;
      s.kind = StmtKind::empty;
      s.pos = pos;
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("if")) {
      next();
      Stmt s;
      s.kind = StmtKind::if_;
      s.pos = pos;
      expect_punct("(");
      s.expr = expression();
      expect_punct(")");
      s.body = statement();
      if (accept_keyword("else")) s.else_body = statement();
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("while")) {
      next();
      Stmt s;
      s.kind = StmtKind::while_;
      s.pos = pos;
      expect_punct("(");
      s.expr = expression();
      expect_punct(")");
      s.body = statement();
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("do")) {
      next();
      Stmt s;
      s.kind = StmtKind::do_while;
      s.pos = pos;
      s.body = statement();
      if (!accept_keyword("while")) fail(peek().pos, "expected 'while' before " + describe(peek()));
      expect_punct("(");
      s.expr = expression();
      expect_punct(")");
      expect_punct(";");
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("for")) {
      next();
      Stmt s;
      s.kind = StmtKind::for_;
      s.pos = pos;
      expect_punct("(");
      if (peek().is_punct(";")) {
        next();
      } else if (starts_type()) {
        s.init = declaration();
      } else {
        Stmt init;
        init.kind = StmtKind::expr;
        init.pos = peek().pos;
        init.expr = expression();
        expect_punct(";");
        s.init = add_stmt(std::move(init));
      }
      if (!peek().is_punct(";")) s.expr = expression();
      expect_punct(";");
      if (!peek().is_punct(")")) s.step = expression();
      expect_punct(")");
      s.body = statement();
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("return")) {
      next();
      Stmt s;
      s.kind = StmtKind::return_;
      s.pos = pos;
      if (!peek().is_punct(";")) s.expr = expression();
      expect_punct(";");
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("break") || t.is_keyword("continue")) {
      bool is_break = t.is_keyword("break");
      next();
      expect_punct(";");
      Stmt s;
      s.kind = is_break ? StmtKind::break_ : StmtKind::continue_;
      s.pos = pos;
      return add_stmt(std::move(s));
    }
    if (t.is_keyword("__shared__") || (t.is_keyword("extern") && peek(1).is_keyword("__shared__"))) {
      return shared_declaration();
    }
    if (t.is_keyword("static")) fail(pos, "static local variables are not supported");
    if (starts_type()) return declaration();
    Stmt s;
    s.kind = StmtKind::expr;
    s.pos = pos;
    s.expr = expression();
    expect_punct(";");
    return add_stmt(std::move(s));
  }

  NodeId declaration() {
    Stmt s;
    s.kind = StmtKind::decl;
    s.pos = peek().pos;
    Scalar base = base_type();
    while (true) {
      Declarator d;
      // Each declarator carries its own pointer level, as in C.
      d.type = pointer_suffix(base);
      d.pos = peek().pos;
      d.name = expect_ident("variable name");
      if (peek().is_punct("[")) fail(peek().pos, "local arrays must be declared __shared__");
      if (accept_punct("=")) d.init = assignment();
      s.decls.push_back(std::move(d));
      if (!accept_punct(",")) break;
    }
    expect_punct(";");
    return add_stmt(std::move(s));
  }

  NodeId shared_declaration() {
    Stmt s;
    s.kind = StmtKind::shared_decl;
    s.pos = peek().pos;
    if (accept_keyword("extern")) s.dynamic_shared = true;
    next();  // __shared__
    if (!starts_type()) fail(peek().pos, "expected type after __shared__");
    Scalar base = base_type();
    Type type = pointer_suffix(base);
    if (type.pointer) fail(s.pos, "__shared__ pointers are not supported");
    if (base == Scalar::void_) fail(s.pos, "__shared__ variable of type void");
    s.decl_type = type;
    Declarator d;
    d.pos = peek().pos;
    d.name = expect_ident("variable name");
    if (s.dynamic_shared) {
      expect_punct("[");
      expect_punct("]");
    } else if (accept_punct("[")) {
      SourcePos size_pos = peek().pos;
      NodeId size_expr = ternary();
      std::optional<std::int64_t> n = fold_constant(size_expr);
      if (!n) fail(size_pos, "__shared__ array size must be an integer constant expression");
      if (*n <= 0) fail(size_pos, "__shared__ array size must be positive");
      s.array_size = *n;
      expect_punct("]");
    }
    if (peek().is_punct("=")) fail(peek().pos, "__shared__ variables cannot have initializers");
    if (peek().is_punct(",")) fail(peek().pos, "declare one __shared__ variable per statement");
    expect_punct(";");
    s.decls.push_back(std::move(d));
    return add_stmt(std::move(s));
  }

  std::optional<std::int64_t> fold_constant(NodeId id) const {
    const Expr& e = module_.exprs[id];
    if (e.kind == ExprKind::int_lit) return static_cast<std::int64_t>(e.int_value);
    if (e.kind == ExprKind::unary && e.un == UnOp::neg) {
      auto v = fold_constant(e.lhs);
      if (v) return -*v;
      return std::nullopt;
    }
    if (e.kind != ExprKind::binary) return std::nullopt;
    auto a = fold_constant(e.lhs);
    auto b = fold_constant(e.rhs);
    if (!a || !b) return std::nullopt;
    switch (e.bin) {
      case BinOp::add: return *a + *b;
      case BinOp::sub: return *a - *b;
      case BinOp::mul: return *a * *b;
      case BinOp::div: return *b == 0 ? std::nullopt : std::optional<std::int64_t>(*a / *b);
      case BinOp::rem: return *b == 0 ? std::nullopt : std::optional<std::int64_t>(*a % *b);
      case BinOp::shl: return (*b < 0 || *b > 62) ? std::nullopt : std::optional<std::int64_t>(*a << *b);
      case BinOp::shr: return (*b < 0 || *b > 62) ? std::nullopt : std::optional<std::int64_t>(*a >> *b);
      default: return std::nullopt;
    }
  }

  // --- expressions ----------------------------------------------------------

  NodeId expression() { return assignment(); }

  NodeId assignment() {
    NodeId lhs = ternary();
    const Token& t = peek();
    if (t.kind != Tok::punct) return lhs;
    static const std::pair<std::string_view, BinOp> kCompound[] = {
        {"+=", BinOp::add},     {"-=", BinOp::sub},     {"*=", BinOp::mul},
        {"/=", BinOp::div},     {"%=", BinOp::rem},     {"<<=", BinOp::shl},
        {">>=", BinOp::shr},    {"&=", BinOp::bit_and}, {"|=", BinOp::bit_or},
        {"^=", BinOp::bit_xor},
    };
    Expr e;
    e.kind = ExprKind::assign;
    e.pos = t.pos;
    if (t.text == "=") {
      next();
    } else {
      bool found = false;
      for (const auto& [spelling, op] : kCompound) {
        if (t.text == spelling) {
          next();
          e.compound = true;
          e.bin = op;
          found = true;
          break;
        }
      }
      if (!found) return lhs;
    }
    e.lhs = lhs;
    e.rhs = assignment();
    return add_expr(std::move(e));
  }

  NodeId ternary() {
    NodeId cond = binary(0);
    if (!peek().is_punct("?")) return cond;
    Expr e;
    e.kind = ExprKind::ternary;
    e.pos = next().pos;
    e.lhs = cond;
    e.rhs = expression();
    expect_punct(":");
    e.third = ternary();
    return add_expr(std::move(e));
  }

  struct BinLevel {
    std::string_view spelling;
    BinOp op;
    int precedence;
  };

  static std::optional<BinLevel> binary_op(const Token& t) {
    static const BinLevel kOps[] = {
        {"||", BinOp::log_or, 1},  {"&&", BinOp::log_and, 2}, {"|", BinOp::bit_or, 3},
        {"^", BinOp::bit_xor, 4},  {"&", BinOp::bit_and, 5},  {"==", BinOp::eq, 6},
        {"!=", BinOp::ne, 6},      {"<", BinOp::lt, 7},       {">", BinOp::gt, 7},
        {"<=", BinOp::le, 7},      {">=", BinOp::ge, 7},      {"<<", BinOp::shl, 8},
        {">>", BinOp::shr, 8},     {"+", BinOp::add, 9},      {"-", BinOp::sub, 9},
        {"*", BinOp::mul, 10},     {"/", BinOp::div, 10},     {"%", BinOp::rem, 10},
    };
    if (t.kind != Tok::punct) return std::nullopt;
    for (const auto& level : kOps) {
      if (t.text == level.spelling) return level;
    }
    return std::nullopt;
  }

  // Precedence climbing over the left-associative binary operators.
  NodeId binary(int min_precedence) {
    NodeId lhs = unary();
    while (true) {
      auto op = binary_op(peek());
      if (!op || op->precedence <= min_precedence) break;
      Expr e;
      e.kind = ExprKind::binary;
      e.pos = next().pos;
      e.bin = op->op;
      e.lhs = lhs;
      e.rhs = binary(op->precedence);
      lhs = add_expr(std::move(e));
    }
    return lhs;
  }

  NodeId unary() {
    const Token& t = peek();
    SourcePos pos = t.pos;
    if (t.kind == Tok::punct) {
      auto make_unary = [&](ExprKind kind, UnOp op) {
        next();
        Expr e;
        e.kind = kind;
        e.pos = pos;
        e.un = op;
        e.lhs = unary();
        return add_expr(std::move(e));
      };
      if (t.text == "-") return make_unary(ExprKind::unary, UnOp::neg);
      if (t.text == "+") return make_unary(ExprKind::unary, UnOp::plus);
      if (t.text == "!") return make_unary(ExprKind::unary, UnOp::log_not);
      if (t.text == "~") return make_unary(ExprKind::unary, UnOp::bit_not);
      if (t.text == "*") return make_unary(ExprKind::deref, UnOp::neg);
      if (t.text == "&") return make_unary(ExprKind::addr_of, UnOp::neg);
      if (t.text == "++") return make_unary(ExprKind::pre_inc, UnOp::neg);
      if (t.text == "--") return make_unary(ExprKind::pre_dec, UnOp::neg);
      if (t.text == "(" && starts_type(1)) {
        next();
        Scalar base = base_type();
        Type type = pointer_suffix(base);
        expect_punct(")");
        Expr e;
        e.kind = ExprKind::cast;
        e.pos = pos;
        e.cast_type = type;
        e.lhs = unary();
        return add_expr(std::move(e));
      }
    }
    if (t.is_keyword("sizeof")) fail(pos, "sizeof is not supported");
    return postfix();
  }

  NodeId postfix() {
    NodeId e = primary();
    while (true) {
      const Token& t = peek();
      if (t.is_punct("[")) {
        Expr ix;
        ix.kind = ExprKind::index;
        ix.pos = next().pos;
        ix.lhs = e;
        ix.rhs = expression();
        expect_punct("]");
        e = add_expr(std::move(ix));
      } else if (t.is_punct("++") || t.is_punct("--")) {
        Expr inc;
        inc.kind = t.is_punct("++") ? ExprKind::post_inc : ExprKind::post_dec;
        inc.pos = next().pos;
        inc.lhs = e;
        e = add_expr(std::move(inc));
      } else if (t.is_punct("(")) {
        fail(t.pos, "called object is not a function name");
      } else if (t.is_punct(".") || t.is_punct("->")) {
        fail(t.pos, "member access is only supported on threadIdx, blockIdx, blockDim and gridDim");
      } else {
        break;
      }
    }
    return e;
  }

  static std::optional<BuiltinVar> builtin_var(std::string_view name) {
    if (name == "threadIdx") return BuiltinVar::thread_idx;
    if (name == "blockIdx") return BuiltinVar::block_idx;
    if (name == "blockDim") return BuiltinVar::block_dim;
    if (name == "gridDim") return BuiltinVar::grid_dim;
    return std::nullopt;
  }

  NodeId primary() {
    const Token& t = peek();
    SourcePos pos = t.pos;
    if (t.kind == Tok::int_lit) {
      Expr e;
      e.kind = ExprKind::int_lit;
      e.pos = pos;
      e.int_value = t.int_value;
      e.literal = t.literal;
      next();
      return add_expr(std::move(e));
    }
    if (t.kind == Tok::float_lit) {
      Expr e;
      e.kind = ExprKind::float_lit;
      e.pos = pos;
      e.float_value = t.float_value;
      e.literal = t.literal;
      next();
      return add_expr(std::move(e));
    }
    if (t.kind == Tok::ident) {
      std::string name = next().text;
      if (auto var = builtin_var(name)) {
        if (!peek().is_punct(".")) fail(peek().pos, "expected '.x', '.y' or '.z' after " + name);
        next();
        const Token& member = peek();
        if (member.kind != Tok::ident || (member.text != "x" && member.text != "y" && member.text != "z")) {
          fail(member.pos, "expected 'x', 'y' or 'z' after '" + name + ".'");
        }
        Expr e;
        e.kind = ExprKind::builtin_var;
        e.pos = pos;
        e.var = *var;
        e.axis = static_cast<std::uint8_t>(member.text[0] - 'x');
        e.name = name;
        next();
        return add_expr(std::move(e));
      }
      if (peek().is_punct("(")) {
        next();
        Expr e;
        e.kind = ExprKind::call;
        e.pos = pos;
        e.name = std::move(name);
        if (!peek().is_punct(")")) {
          while (true) {
            e.args.push_back(assignment());
            if (!accept_punct(",")) break;
          }
        }
        expect_punct(")");
        return add_expr(std::move(e));
      }
      Expr e;
      e.kind = ExprKind::ident;
      e.pos = pos;
      e.name = std::move(name);
      return add_expr(std::move(e));
    }
    if (t.is_punct("(")) {
      next();
      NodeId inner = expression();
      expect_punct(")");
      return inner;
    }
    if (t.kind == Tok::string_lit) fail(pos, "string literals are not supported in expressions");
    fail(pos, "expected expression before " + describe(t));
  }

  std::string origin_;
  std::vector<Token> tokens_;
  std::size_t cursor_ = 0;
  KernelModule module_;
};

}  // namespace

KernelModule parse(const SourceText& source, const ParseOptions& options) {
  return Parser(source, options).run();
}

}  // namespace simt::lang
