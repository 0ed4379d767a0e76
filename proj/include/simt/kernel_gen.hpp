#ifndef SIMT_KERNEL_GEN_HPP
#define SIMT_KERNEL_GEN_HPP

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "simt/device_array.hpp"
#include "simt/source_module.hpp"

// Run-time code generation: kernels assembled from source templates and
// compiled through source_module, so they share its cache.

namespace simt {

/// An argument of a generated kernel: an array for pointer parameters, or a
/// host scalar coerced to the parameter's type.
class KernelArg {
 public:
  KernelArg(const DeviceArray& a) : value_(&a) {}  // NOLINT
  KernelArg(const Number& n) : value_(n) {}        // NOLINT
  template <class T>
    requires std::is_arithmetic_v<T>
  KernelArg(T v) : value_(Number(v)) {}              // NOLINT
  KernelArg(std::complex<float> v) : value_(Number(v)) {}   // NOLINT
  KernelArg(std::complex<double> v) : value_(Number(v)) {}  // NOLINT

  const DeviceArray* array() const noexcept {
    auto p = std::get_if<const DeviceArray*>(&value_);
    return p ? *p : nullptr;
  }
  const Number* number() const noexcept { return std::get_if<Number>(&value_); }

 private:
  std::variant<const DeviceArray*, Number> value_;
};

struct LaunchPolicy {
  std::uint32_t block = 256;
  std::uint32_t max_grid = 128;
};

/// Statements executed for each index `i` of equal-length arrays.
class ElementwiseKernel {
 public:
  /// `arguments` is a C parameter list; `operation` a statement list over
  /// `i` (unsigned int) and the arguments. CompileError positions inside the
  /// user's text refer to that text.
  ElementwiseKernel(Context& ctx, std::string_view arguments, std::string_view operation,
                    std::string_view name = "elementwise", std::string_view preamble = "");

  /// n is the common size of the array arguments; ShapeError if sizes
  /// differ. n = 0 launches nothing.
  void operator()(std::span<const KernelArg> args, const LaunchPolicy& policy = {},
                  std::optional<Stream> stream = std::nullopt) const;
  void operator()(std::initializer_list<KernelArg> args, const LaunchPolicy& policy = {}) const {
    (*this)(std::span<const KernelArg>(args.begin(), args.size()), policy);
  }

  const std::string& source() const noexcept { return source_; }
  const KernelHandle& handle() const noexcept { return handle_; }
  /// User parameters followed by `unsigned int n`.
  const lang::ParamSignature& signature() const { return handle_.signature(); }
  CacheStatus cache_status() const noexcept { return status_; }

 private:
  std::string source_;
  KernelHandle handle_;
  CacheStatus status_;
};

/// Map-reduce over equal-length arrays to a shape () array of `out`.
class ReductionKernel {
 public:
  /// `reduce_expr` combines formals `a` and `b`; `map_expr` is evaluated
  /// per index `i` with the arguments in scope; `neutral` pads partial
  /// blocks and is the empty-input result.
  ReductionKernel(Context& ctx, DType out, std::string_view neutral, std::string_view reduce_expr,
                  std::string_view map_expr, std::string_view arguments, std::string_view name = "reduce",
                  std::string_view preamble = "");

  DeviceArray operator()(std::span<const KernelArg> args, std::optional<Stream> stream = std::nullopt) const;
  DeviceArray operator()(std::initializer_list<KernelArg> args) const {
    return (*this)(std::span<const KernelArg>(args.begin(), args.size()));
  }

  const std::string& source() const noexcept { return source_; }
  DType out_dtype() const noexcept { return out_; }
  static constexpr std::uint32_t block_size = 256;
  static constexpr std::uint32_t max_blocks = 1024;

 private:
  DType out_;
  std::string source_;
  KernelHandle stage1_;
  KernelHandle stage2_;
};

/// Work-efficient prefix scan of a 1-D array.
class ScanKernel {
 public:
  ScanKernel(Context& ctx, DType dtype, std::string_view scan_expr, std::string_view neutral, bool inclusive,
             std::string_view name = "scan", std::string_view preamble = "");

  /// ShapeError unless 1-D; DTypeError unless the dtype matches.
  DeviceArray operator()(const DeviceArray& input, std::optional<Stream> stream = std::nullopt) const;

  const std::string& source() const noexcept { return source_; }
  bool inclusive() const noexcept { return inclusive_; }
  static constexpr std::uint32_t block_size = 256;
  static constexpr std::uint32_t tile = 2 * block_size;

 private:
  void scan_into(const DeviceArray& in, DeviceArray& out, bool inclusive, const std::optional<Stream>& stream) const;

  DType dtype_;
  bool inclusive_;
  std::string source_;
  KernelHandle blocks_;
  KernelHandle add_;
};

/// Replaces `${name}` placeholders; `$$` is a literal dollar sign.
/// SubstitutionError lists unknown placeholders and, when `strict`, unused
/// mapping keys.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& mapping,
                       bool strict = false);

/// One variant of the autotuner's search space. `run` executes once and
/// must leave the device synchronized; it returns the variant's output
/// (empty when not checked).
struct TuneCandidate {
  std::map<std::string, std::string> params;
  std::function<HostArray()> run;
};

struct TuneRow {
  std::map<std::string, std::string> params;
  double median_ms = 0;
  std::vector<double> samples_ms;
  bool qualified = true;
  std::string note;
};

struct TuneResult {
  std::size_t best = 0;
  std::map<std::string, std::string> best_params;
  std::vector<TuneRow> table;
};

struct TuneOptions {
  int repeats = 5;
  int warmup = 1;
  /// Outputs are compared against this when present: integers bitwise,
  /// floating values within `rtol` relative (plus `atol`) per element.
  std::optional<HostArray> reference;
  double rtol = 1e-6;
  double atol = 1e-12;
};

/// Argmin of median wall time, ties to the first listed; TuneError if no
/// candidate qualifies.
TuneResult autotune(const std::vector<TuneCandidate>& candidates, const TuneOptions& options = {});

/// True when `got` matches `want` under the autotuner's comparison rule.
bool outputs_match(const HostArray& got, const HostArray& want, double rtol, double atol);

}  // namespace simt

#endif  // SIMT_KERNEL_GEN_HPP
