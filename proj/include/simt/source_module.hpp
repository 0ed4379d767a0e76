#ifndef SIMT_SOURCE_MODULE_HPP
#define SIMT_SOURCE_MODULE_HPP

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "simt/device.hpp"
#include "simt/kernel_lang.hpp"
#include "simt/memory.hpp"

namespace simt {

namespace detail {
struct ModuleState;
struct HandleState;
}  // namespace detail

struct ModuleOptions {
  /// Compile the text as given instead of wrapping it in `extern "C" { }`.
  bool no_extern_c = false;
  /// false bypasses both cache lookup and cache store.
  bool use_cache = true;
  /// Overrides the context's cache directory and the per-user default.
  std::optional<std::filesystem::path> cache_dir;
  /// Label used in diagnostics; not part of the cache key.
  std::string origin = "<source_module>";
};

enum class CacheStatus : std::uint8_t { hit, miss, bypassed };
const char* to_string(CacheStatus s) noexcept;

/// Version string mixed into every cache key.
std::string_view cache_format_version() noexcept;

/// Hex SHA-256 of (compiled text, canonical options, format version).
std::string cache_key(std::string_view source, const ModuleOptions& options = {});

/// SIMT_CACHE_DIR from `env`, else $XDG_CACHE_HOME/simt, else
/// $HOME/.cache/simt, else a per-user directory under the temp dir.
std::filesystem::path default_cache_dir(const Environment& env);

class KernelHandle;

/// A typed module compiled for one context. It refers to the context
/// weakly; using it after the context is gone raises StateError.
class CompiledModule {
 public:
  const lang::KernelModule& module() const;
  const std::string& digest() const;
  CacheStatus cache_status() const;
  std::vector<std::string> entry_names() const;

 private:
  friend class KernelHandle;
  friend CompiledModule source_module(Context&, std::string_view, const ModuleOptions&);
  friend KernelHandle get_function(const CompiledModule&, std::string_view);
  explicit CompiledModule(std::shared_ptr<const detail::ModuleState> s) : state_(std::move(s)) {}

  std::shared_ptr<const detail::ModuleState> state_;
};

/// Compiles through the on-disk cache. CompileError line numbers refer to
/// the caller's text.
CompiledModule source_module(Context& ctx, std::string_view source, const ModuleOptions& options = {});

/// An argument of a prepared call, coerced according to the prepared format:
/// integers to any scalar code, reals to floating or complex codes, complex
/// to complex codes; pointers and allocations (and u64 addresses) to `P`.
class RawArg {
 public:
  enum class Kind : std::uint8_t { integer, real, complex, pointer };

  template <class T>
    requires std::is_integral_v<T>
  RawArg(T v) : kind_(Kind::integer), int_(static_cast<std::int64_t>(v)), unsigned_(std::is_unsigned_v<T>) {}  // NOLINT
  RawArg(float v) : kind_(Kind::real), real_(v) {}    // NOLINT
  RawArg(double v) : kind_(Kind::real), real_(v) {}   // NOLINT
  RawArg(std::complex<float> v) : kind_(Kind::complex), complex_(v) {}   // NOLINT
  RawArg(std::complex<double> v) : kind_(Kind::complex), complex_(v) {}  // NOLINT
  RawArg(DevicePtr p) : kind_(Kind::pointer), ptr_(p) {}                  // NOLINT
  RawArg(const DeviceAllocation& a) : kind_(Kind::pointer), ptr_(a.ptr()) {}  // NOLINT

  /// Throws ArgumentError when the value cannot be passed as `tag`.
  TaggedValue coerce(ArgTag tag, std::size_t position) const;

 private:
  Kind kind_;
  std::int64_t int_ = 0;
  bool unsigned_ = false;
  double real_ = 0;
  std::complex<double> complex_;
  DevicePtr ptr_;
};

/// Tags of a prepared-call format: P=Ptr i=I32 I=U32 q=I64 f=F32 d=F64
/// F=C64 D=C128. Throws FormatError naming the first bad character.
std::vector<ArgTag> parse_arg_format(std::string_view format);

/// A callable entry of a compiled module. Copies share the prepared state.
class KernelHandle {
 public:
  /// An empty handle; only assignment and destruction are valid.
  KernelHandle() = default;

  const std::string& name() const;
  const lang::ParamSignature& signature() const;
  const KernelRef& kernel_ref() const;

  /// Launches with explicitly tagged arguments.
  LaunchTicket operator()(Dim3 grid, Dim3 block, std::span<const TaggedValue> args,
                          std::optional<Stream> stream = std::nullopt, std::uint32_t shared_bytes = 0) const;
  LaunchTicket call(Dim3 grid, Dim3 block, std::span<const TaggedValue> args,
                    std::optional<Stream> stream = std::nullopt, std::uint32_t shared_bytes = 0) const {
    return (*this)(grid, block, args, std::move(stream), shared_bytes);
  }

  /// Validates `format` against the signature and stores it with the
  /// default block; a later prepare replaces both.
  void prepare(std::string_view format, Dim3 block = Dim3{}, std::uint32_t shared_bytes = 0);
  bool prepared() const;

  /// Throws StateError when not prepared. `block` overrides the prepared
  /// block for this call only.
  LaunchTicket prepared_call(Dim3 grid, std::span<const RawArg> args, std::optional<Stream> stream = std::nullopt,
                             std::optional<Dim3> block = std::nullopt) const;
  LaunchTicket prepared_call(Dim3 grid, std::initializer_list<RawArg> args,
                             std::optional<Stream> stream = std::nullopt,
                             std::optional<Dim3> block = std::nullopt) const {
    return prepared_call(grid, std::span<const RawArg>(args.begin(), args.size()), std::move(stream), block);
  }

 private:
  friend KernelHandle get_function(const CompiledModule&, std::string_view);
  explicit KernelHandle(std::shared_ptr<detail::HandleState> s) : state_(std::move(s)) {}

  std::shared_ptr<detail::HandleState> state_;
};

/// NotFound unless `name` is a `__global__` entry of the module.
KernelHandle get_function(const CompiledModule& module, std::string_view name);

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t compiles = 0;  // modules parsed and type checked, cached or not
};

/// Lookups performed through this context.
CacheStats cache_stats(const Context& ctx);

struct CacheDirStats {
  std::uint64_t hits = 0;  // accumulated over every process using the directory
  std::uint64_t misses = 0;
  std::uint64_t entries = 0;
};

CacheDirStats cache_dir_stats(const std::filesystem::path& dir);

/// Removes every cache entry and resets the directory's counters; returns
/// the number of entries removed.
std::size_t cache_clear(const std::filesystem::path& dir);

}  // namespace simt

#endif  // SIMT_SOURCE_MODULE_HPP
