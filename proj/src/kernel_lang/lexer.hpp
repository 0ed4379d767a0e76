#ifndef SIMT_SRC_KERNEL_LANG_LEXER_HPP
#define SIMT_SRC_KERNEL_LANG_LEXER_HPP

#include <string>
#include <string_view>
#include <vector>

#include "simt/kernel_lang.hpp"

namespace simt::lang::detail {

enum class Tok : std::uint8_t {
  eof,
  ident,
  keyword,
  int_lit,
  float_lit,
  string_lit,
  punct,
};

struct Token {
  Tok kind = Tok::eof;
  std::string text;  // identifier/keyword/punctuator spelling, string contents
  SourcePos pos;
  std::uint64_t int_value = 0;
  double float_value = 0.0;
  Scalar literal = Scalar::i32;

  bool is(Tok k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return is(Tok::punct, t); }
  bool is_keyword(std::string_view t) const { return is(Tok::keyword, t); }
};

/// Tokenizes the whole source. Comments and `#include <pycuda-complex.hpp>`
/// lines are dropped; any other preprocessor line is an error.
std::vector<Token> tokenize(const SourceText& source, int first_line);

}  // namespace simt::lang::detail

#endif  // SIMT_SRC_KERNEL_LANG_LEXER_HPP
