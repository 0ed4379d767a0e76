#ifndef SIMT_DEVICE_HPP
#define SIMT_DEVICE_HPP

#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "simt/error.hpp"
#include "simt/types.hpp"

// The simulated SIMT device: contexts, streams and kernel launches.
// Execution is queued per stream and performed at synchronization points.

namespace simt {

class Context;

namespace detail {
class ContextImpl;
struct Program;
struct TicketState;
}  // namespace detail

enum class ScheduleMode : std::uint8_t { deterministic, shuffled };

const char* to_string(ScheduleMode mode) noexcept;
/// "deterministic" or "shuffled"; throws ArgumentError otherwise.
ScheduleMode parse_schedule(std::string_view text);

struct ContextConfig {
  std::uint64_t arena_bytes = std::uint64_t{512} << 20;
  unsigned workers = 1;
  ScheduleMode schedule = ScheduleMode::deterministic;
  std::uint64_t seed = 0;
  // Fills fresh allocations with 0xCD and checks interpreter invariants.
  bool debug = false;
  // Compile cache used by modules built on this context when their options
  // name none; unset falls back to the per-user default.
  std::optional<std::filesystem::path> cache_dir;
};

struct DeviceLimits {
  std::uint32_t max_threads_per_block = 1024;
  Dim3 max_block_dim{1024, 1024, 64};
  std::uint32_t max_grid_dim = 65535;
  std::uint32_t max_shared_bytes = 49152;
};

using Environment = std::map<std::string, std::string>;

/// The SIMT_* variables of the current process.
Environment process_environment();

/// Worker count, schedule mode, seed and cache directory from SIMT_WORKERS,
/// SIMT_SCHEDULE, SIMT_SEED and SIMT_CACHE_DIR, over `base`. Throws InitError on malformed values.
ContextConfig config_from_environment(const Environment& env, ContextConfig base = {});

/// SIMT_DEVICE_COUNT, default 1.
int device_count(const Environment& env);

struct LaunchConfig {
  Dim3 grid;
  Dim3 block;
  std::uint32_t shared_bytes = 0;  // dynamic shared memory
};

/// A compiled entry point, as consumed by launch(). Obtained through
/// source_module; `owner` identifies the context it was compiled for.
struct KernelRef {
  std::shared_ptr<const detail::Program> program;
  std::int32_t entry = -1;
  const detail::ContextImpl* owner = nullptr;

  const std::string& name() const;
};

class Stream {
 public:
  std::uint32_t id() const noexcept { return id_; }
  /// Commands enqueued and not yet executed.
  std::size_t pending() const;
  void synchronize() const;
  bool belongs_to(const Context& ctx) const noexcept;

  friend bool operator==(const Stream& a, const Stream& b) noexcept {
    return a.ctx_ == b.ctx_ && a.id_ == b.id_;
  }

 private:
  friend class Context;
  friend class detail::ContextImpl;
  Stream(std::shared_ptr<detail::ContextImpl> ctx, std::uint32_t id) : ctx_(std::move(ctx)), id_(id) {}

  std::shared_ptr<detail::ContextImpl> ctx_;
  std::uint32_t id_ = 0;
};

/// Completion handle for one enqueued command.
class LaunchTicket {
 public:
  LaunchTicket() = default;

  std::uint32_t stream_id() const noexcept;
  bool done() const noexcept;
  /// The command's execution error, if it has run and failed.
  std::exception_ptr error() const;
  /// Runs the command's stream up to and including this command. Errors are
  /// not thrown here; they stay deferred to the next synchronize.
  void wait() const;
  bool valid() const noexcept { return state_ != nullptr; }

 private:
  friend class detail::ContextImpl;
  explicit LaunchTicket(std::shared_ptr<detail::TicketState> s) : state_(std::move(s)) {}

  std::shared_ptr<detail::TicketState> state_;
};

struct DeviceCounters {
  std::uint64_t launches = 0;         // accepted launches
  std::uint64_t blocks = 0;           // blocks interpreted
  std::uint64_t copies = 0;           // memcpy commands executed
  std::uint64_t arena_allocations = 0;
};

class Context {
 public:
  explicit Context(std::shared_ptr<detail::ContextImpl> impl) : impl_(std::move(impl)) {}

  int device_index() const;
  const ContextConfig& config() const;
  const DeviceLimits& limits() const;
  std::uint64_t arena_bytes() const;

  Stream default_stream() const;
  Stream create_stream();

  /// Runs every queued command, then rethrows the earliest deferred launch
  /// error still pending (clearing it).
  void synchronize();

  DeviceCounters counters() const;

  const std::shared_ptr<detail::ContextImpl>& impl() const noexcept { return impl_; }

  friend bool operator==(const Context& a, const Context& b) noexcept { return a.impl_ == b.impl_; }

 private:
  std::shared_ptr<detail::ContextImpl> impl_;
};

/// Context on the device named by SIMT_DEVICE (default 0), configured from
/// the SIMT_* variables.
Context autoinit();
Context autoinit(const Environment& env);

/// Throws InitError when the index is out of range or the config is invalid.
Context create_context(int device_index, const ContextConfig& config = {});
Context create_context(int device_index, const ContextConfig& config, int device_count);

/// Validates and enqueues. ArgumentError and InvalidLaunchConfig are raised
/// here; execution errors are deferred.
LaunchTicket launch(Context& ctx, const KernelRef& kernel, const LaunchConfig& cfg,
                    std::span<const TaggedValue> args, std::optional<Stream> stream = std::nullopt);

inline void synchronize(Context& ctx) { ctx.synchronize(); }
inline void stream_synchronize(const Stream& s) { s.synchronize(); }

}  // namespace simt

#endif  // SIMT_DEVICE_HPP
