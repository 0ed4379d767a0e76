#ifndef SIMT_SRC_KERNEL_GEN_SOURCE_BUILDER_HPP
#define SIMT_SRC_KERNEL_GEN_SOURCE_BUILDER_HPP

#include <string>
#include <string_view>
#include <vector>

#include "simt/source_module.hpp"

namespace simt::detail {

/// Assembles generated kernel text and remembers where caller-supplied
/// fragments landed, so diagnostics point into the caller's fragment.
class SourceBuilder {
 public:
  void add(std::string_view s) {
    for (char c : s) advance(c);
    text_ += s;
  }

  /// Appends a caller fragment labelled `label` in diagnostics.
  void user(std::string label, std::string_view s) {
    Fragment f{std::move(label), line_, column_, line_, column_};
    add(s);
    f.end_line = line_;
    f.end_column = column_;
    fragments_.push_back(std::move(f));
  }

  const std::string& text() const noexcept { return text_; }

  /// Compiles the text; a CompileError inside a fragment is rethrown with
  /// the fragment's label and fragment-relative position.
  CompiledModule compile(Context& ctx, const ModuleOptions& options) const {
    try {
      return source_module(ctx, text_, options);
    } catch (const CompileError& e) {
      for (const Fragment& f : fragments_) {
        if (!f.contains(e.line(), e.column())) continue;
        int line = e.line() - f.line + 1;
        int column = e.line() == f.line ? e.column() - f.column + 1 : e.column();
        throw CompileError(f.label, line, column, e.message());
      }
      throw;
    }
  }

 private:
  struct Fragment {
    std::string label;
    int line;
    int column;
    int end_line;
    int end_column;

    bool contains(int l, int c) const {
      if (l < line || l > end_line) return false;
      if (l == line && c < column) return false;
      // The position just past the fragment still blames the fragment: a
      // missing operand is reported at the following token.
      if (l == end_line && c > end_column) return false;
      return true;
    }
  };

  void advance(char c) {
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
  }

  std::string text_;
  int line_ = 1;
  int column_ = 1;
  std::vector<Fragment> fragments_;
};

}  // namespace simt::detail

#endif  // SIMT_SRC_KERNEL_GEN_SOURCE_BUILDER_HPP
