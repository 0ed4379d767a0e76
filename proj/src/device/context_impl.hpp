#ifndef SIMT_SRC_DEVICE_CONTEXT_IMPL_HPP
#define SIMT_SRC_DEVICE_CONTEXT_IMPL_HPP

#include <atomic>
#include <deque>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "device/bytecode.hpp"
#include "device/vm.hpp"
#include "device/worker_pool.hpp"
#include "simt/device.hpp"

namespace simt::detail {

struct TicketState {
  std::uint32_t stream = 0;
  std::uint64_t seq = 0;
  std::weak_ptr<ContextImpl> ctx;
  std::atomic<bool> done{false};
  std::exception_ptr error;  // written under the context mutex before `done`
};

struct Command {
  enum class Kind : std::uint8_t { launch, htod, dtoh, dtod };

  Kind kind = Kind::launch;
  std::uint64_t seq = 0;
  std::shared_ptr<TicketState> ticket;

  KernelRef kernel;
  LaunchConfig cfg;
  std::vector<Slot> args;

  std::uint64_t dst = 0;
  std::uint64_t src = 0;
  std::uint64_t size = 0;
  std::vector<std::byte> data;  // htod payload, captured at enqueue
  std::byte* host = nullptr;    // dtoh destination
};

struct StreamState {
  std::deque<Command> queue;
  std::exception_ptr error;  // first unreported failure
  std::uint64_t error_seq = 0;
};

struct CacheCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t compiles = 0;
};

/// State of one simulated device context. Every member is guarded by `mu`;
/// methods suffixed `_locked` expect the caller to hold it.
class ContextImpl : public std::enable_shared_from_this<ContextImpl> {
 public:
  ContextImpl(int device, const ContextConfig& config);
  ~ContextImpl();

  ContextImpl(const ContextImpl&) = delete;
  ContextImpl& operator=(const ContextImpl&) = delete;

  static ContextImpl& of(const Context& ctx) { return *ctx.impl(); }

  std::uint64_t allocate_locked(std::uint64_t nbytes);
  void release_locked(std::uint64_t base) noexcept;
  /// Throws OutOfBounds unless [addr, addr+n) lies in one live allocation.
  void check_range_locked(std::uint64_t addr, std::uint64_t n, const char* what) const;

  LaunchTicket enqueue_locked(std::uint32_t stream, Command cmd);
  void drain_all_locked();
  /// Runs `stream`'s commands with seq <= `up_to`.
  void drain_stream_locked(std::uint32_t stream,
                           std::uint64_t up_to = std::numeric_limits<std::uint64_t>::max());
  /// Removes and returns the earliest pending stream error (all streams when
  /// `stream` is empty).
  std::exception_ptr take_error_locked(std::optional<std::uint32_t> stream);
  /// drain_all_locked + take_error_locked, rethrowing.
  void synchronize_locked();

  GlobalMemory memory_view() const;
  Stream make_stream(std::uint32_t id) { return Stream(shared_from_this(), id); }

  mutable std::mutex mu;

  const int device;
  const ContextConfig config;
  const DeviceLimits limits;

  std::unique_ptr<std::byte[]> arena;
  std::map<std::uint64_t, std::uint64_t> live;        // base -> size
  std::map<std::uint64_t, std::uint64_t> free_ranges;  // base -> size, coalesced
  std::deque<std::pair<std::uint64_t, std::uint64_t>> released;

  std::map<std::uint32_t, StreamState> streams;
  std::uint32_t next_stream = 1;
  std::uint64_t next_seq = 1;

  DeviceCounters counters;
  CacheCounters cache;

  // Per-context objects owned by higher layers (kernel registry, default
  // pool). Values must not hold strong references to this context.
  std::map<std::string, std::shared_ptr<void>> registry;
  std::shared_ptr<void> default_pool;

 private:
  void execute_locked(Command& cmd);

  std::unique_ptr<WorkerPool> workers_;
  std::mt19937_64 stream_rng_;
  std::uint64_t launch_ordinal_ = 0;
};

}  // namespace simt::detail

#endif  // SIMT_SRC_DEVICE_CONTEXT_IMPL_HPP
