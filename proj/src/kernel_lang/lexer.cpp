#include "kernel_lang/lexer.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <limits>

namespace simt::lang::detail {
namespace {

constexpr std::string_view kKeywords[] = {
    "void",       "int",        "unsigned",  "signed",   "long",       "short",
    "char",       "float",      "double",    "complexf", "complexd",   "bool",
    "if",         "else",       "for",       "while",    "do",         "return",
    "break",      "continue",   "__global__", "__device__", "__shared__", "extern",
    "const",      "volatile",   "__restrict__", "inline", "__forceinline__", "static",
    "sizeof",
};

// Longest first so that maximal munch works with a linear scan.
constexpr std::string_view kPunctuators[] = {
    "<<=", ">>=", "::", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=",  "<<",  ">>", "<=", ">=", "==", "!=", "&&", "||", "->", "+",  "-",
    "*",   "/",   "%",  "&",  "|",  "^",  "~",  "!",  "<",  ">",  "=",  "?",
    ":",   ";",   ",",  ".",  "(",  ")",  "[",  "]",  "{",  "}",  "#",
};

bool is_keyword(std::string_view word) {
  for (auto k : kKeywords) {
    if (k == word) return true;
  }
  return false;
}

class Lexer {
 public:
  Lexer(const SourceText& src, int first_line)
      : text_(src.text), origin_(src.origin), line_(first_line) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool at_line_start = true;
    while (true) {
      skip_space_and_comments(at_line_start);
      if (pos_ >= text_.size()) break;
      char c = text_[pos_];
      if (c == '#' && at_line_start) {
        preprocessor_line();
        continue;
      }
      at_line_start = false;
      SourcePos start = here();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(word(start));
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < text_.size() &&
                  std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
        out.push_back(number(start));
      } else if (c == '"') {
        out.push_back(string_literal(start));
      } else {
        out.push_back(punct(start));
      }
    }
    Token eof;
    eof.kind = Tok::eof;
    eof.pos = here();
    out.push_back(eof);
    return out;
  }

 private:
  [[noreturn]] void fail(SourcePos p, const std::string& msg) const {
    throw CompileError(origin_, p.line, p.column, msg);
  }

  SourcePos here() const { return SourcePos{line_, column_}; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  bool starts_with(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

  void skip_space_and_comments(bool& at_line_start) {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\n') {
        at_line_start = true;
        advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        advance();
      } else if (starts_with("//")) {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (starts_with("/*")) {
        SourcePos start = here();
        advance();
        advance();
        while (pos_ < text_.size() && !starts_with("*/")) advance();
        if (pos_ >= text_.size()) fail(start, "unterminated comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  void preprocessor_line() {
    SourcePos start = here();
    std::size_t begin = pos_;
    while (pos_ < text_.size() && text_[pos_] != '\n') advance();
    std::string line(text_.substr(begin, pos_ - begin));
    std::string squeezed;
    for (char ch : line) {
      if (!std::isspace(static_cast<unsigned char>(ch))) squeezed.push_back(ch);
    }
    if (squeezed == "#include<pycuda-complex.hpp>" || squeezed == "#include\"pycuda-complex.hpp\"") {
      return;
    }
    fail(start, "unsupported preprocessor directive");
  }

  Token word(SourcePos start) {
    std::size_t begin = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      advance();
    }
    Token t;
    t.text = std::string(text_.substr(begin, pos_ - begin));
    t.kind = is_keyword(t.text) ? Tok::keyword : Tok::ident;
    t.pos = start;
    return t;
  }

  Token number(SourcePos start) {
    std::size_t begin = pos_;
    bool hex = starts_with("0x") || starts_with("0X");
    bool is_float = false;
    if (hex) {
      advance();
      advance();
      while (pos_ < text_.size() && std::isxdigit(static_cast<unsigned char>(text_[pos_]))) advance();
    } else {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
      if (pos_ < text_.size() && text_[pos_] == '.') {
        is_float = true;
        advance();
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
      }
      if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
        is_float = true;
        advance();
        if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) advance();
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          fail(start, "malformed exponent in floating literal");
        }
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) advance();
      }
    }
    std::string digits(text_.substr(begin, pos_ - begin));
    std::size_t suffix_begin = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) advance();
    std::string suffix(text_.substr(suffix_begin, pos_ - suffix_begin));

    Token t;
    t.pos = start;
    t.text = digits + suffix;
    if (is_float) {
      t.kind = Tok::float_lit;
      if (suffix.empty()) {
        t.literal = Scalar::f64;
        t.float_value = std::strtod(digits.c_str(), nullptr);
      } else if (suffix == "f" || suffix == "F") {
        t.literal = Scalar::f32;
        t.float_value = static_cast<double>(std::strtof(digits.c_str(), nullptr));
      } else {
        fail(start, "invalid floating literal suffix '" + suffix + "'");
      }
      return t;
    }

    t.kind = Tok::int_lit;
    errno = 0;
    bool octal = !hex && digits.size() > 1 && digits[0] == '0';
    if (octal) {
      for (char ch : digits) {
        if (ch > '7') fail(start, "invalid digit in octal literal");
      }
    }
    if (hex && digits.size() == 2) fail(start, "malformed hexadecimal literal");
    unsigned long long v = std::strtoull(digits.c_str(), nullptr, hex ? 16 : (octal ? 8 : 10));
    if (errno == ERANGE) fail(start, "integer literal too large");
    t.int_value = v;

    bool has_u = false;
    int longs = 0;
    for (char ch : suffix) {
      if (ch == 'u' || ch == 'U') {
        if (has_u) fail(start, "invalid integer literal suffix '" + suffix + "'");
        has_u = true;
      } else if (ch == 'l' || ch == 'L') {
        ++longs;
      } else {
        fail(start, "invalid integer literal suffix '" + suffix + "'");
      }
    }
    if (longs > 2) fail(start, "invalid integer literal suffix '" + suffix + "'");

    constexpr auto i32_max = static_cast<unsigned long long>(std::numeric_limits<std::int32_t>::max());
    constexpr auto u32_max = static_cast<unsigned long long>(std::numeric_limits<std::uint32_t>::max());
    constexpr auto i64_max = static_cast<unsigned long long>(std::numeric_limits<std::int64_t>::max());
    if (has_u && longs > 0) fail(start, "unsupported type: unsigned 64-bit integer literal");
    if (has_u) {
      if (v > u32_max) fail(start, "unsupported type: unsigned 64-bit integer literal");
      t.literal = Scalar::u32;
    } else if (longs > 0) {
      if (v > i64_max) fail(start, "integer literal too large");
      t.literal = Scalar::i64;
    } else if (v <= i32_max) {
      t.literal = Scalar::i32;
    } else if ((hex || octal) && v <= u32_max) {
      t.literal = Scalar::u32;
    } else if (v <= i64_max) {
      t.literal = Scalar::i64;
    } else {
      fail(start, "integer literal too large");
    }
    return t;
  }

  Token string_literal(SourcePos start) {
    advance();
    std::string value;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\n') fail(start, "unterminated string literal");
      if (text_[pos_] == '\\') fail(here(), "escape sequences are not supported");
      value.push_back(text_[pos_]);
      advance();
    }
    if (pos_ >= text_.size()) fail(start, "unterminated string literal");
    advance();
    Token t;
    t.kind = Tok::string_lit;
    t.text = std::move(value);
    t.pos = start;
    return t;
  }

  Token punct(SourcePos start) {
    for (auto p : kPunctuators) {
      if (starts_with(p)) {
        for (std::size_t k = 0; k < p.size(); ++k) advance();
        Token t;
        t.kind = Tok::punct;
        t.text = std::string(p);
        t.pos = start;
        return t;
      }
    }
    unsigned char c = static_cast<unsigned char>(text_[pos_]);
    if (c >= 0x80) fail(start, "unexpected non-ASCII character");
    fail(start, std::string("unexpected character '") + static_cast<char>(c) + "'");
  }

  std::string_view text_;
  std::string origin_;
  std::size_t pos_ = 0;
  int line_;
  int column_ = 1;
};

}  // namespace

std::vector<Token> tokenize(const SourceText& source, int first_line) {
  return Lexer(source, first_line).run();
}

}  // namespace simt::lang::detail
