#ifndef SIMT_MEMORY_HPP
#define SIMT_MEMORY_HPP

#include <cstddef>
#include <cstdint>
#include <memory>

#include "simt/device.hpp"

namespace simt {

namespace detail {
struct PoolState;
}

/// A region of a context's arena. The region is released when the last
/// owner goes away; pooled regions go back to their pool instead.
class DeviceAllocation {
 public:
  DeviceAllocation() = default;
  ~DeviceAllocation() { release(); }

  DeviceAllocation(DeviceAllocation&& other) noexcept;
  DeviceAllocation& operator=(DeviceAllocation&& other) noexcept;
  DeviceAllocation(const DeviceAllocation&) = delete;
  DeviceAllocation& operator=(const DeviceAllocation&) = delete;

  DevicePtr ptr() const noexcept { return DevicePtr{base_}; }
  operator DevicePtr() const noexcept { return ptr(); }  // NOLINT: mirrors passing allocations as pointers

  /// Bytes requested.
  std::uint64_t size() const noexcept { return size_; }
  /// Bytes reserved: the 256-byte rounded size, or the bin size when pooled.
  std::uint64_t capacity() const noexcept { return capacity_; }
  bool live() const noexcept { return base_ != 0; }
  bool pooled() const noexcept { return pool_ != nullptr; }

  /// Idempotent. Pooled regions move to the pool's held list.
  void release() noexcept;

 private:
  friend DeviceAllocation mem_alloc(Context& ctx, std::uint64_t nbytes);
  friend class MemoryPool;

  std::shared_ptr<detail::ContextImpl> ctx_;
  std::shared_ptr<detail::PoolState> pool_;
  std::uint64_t base_ = 0;
  std::uint64_t size_ = 0;
  std::uint64_t capacity_ = 0;
};

/// Throws ArgumentError for 0 bytes and MemoryError when the arena is full.
DeviceAllocation mem_alloc(Context& ctx, std::uint64_t nbytes);

inline void release(DeviceAllocation& a) noexcept { a.release(); }

/// The base address; `as_int(a) + k` is a valid kernel pointer for k < size.
inline std::uint64_t as_int(const DeviceAllocation& a) noexcept { return a.ptr().address; }

// Synchronous copies synchronize the whole device first (rethrowing any
// deferred launch error), then check the range and copy.
void memcpy_htod(Context& ctx, DevicePtr dst, const void* src, std::uint64_t nbytes);
void memcpy_dtoh(Context& ctx, void* dst, DevicePtr src, std::uint64_t nbytes);
void memcpy_dtod(Context& ctx, DevicePtr dst, DevicePtr src, std::uint64_t nbytes);

// Asynchronous copies are ordered with the stream's other commands. The
// htod source is captured at enqueue; the dtoh destination must stay valid
// until the stream is synchronized. Range errors are deferred.
LaunchTicket memcpy_htod_async(Context& ctx, DevicePtr dst, const void* src, std::uint64_t nbytes,
                               const Stream& stream);
LaunchTicket memcpy_dtoh_async(Context& ctx, void* dst, DevicePtr src, std::uint64_t nbytes,
                               const Stream& stream);
LaunchTicket memcpy_dtod_async(Context& ctx, DevicePtr dst, DevicePtr src, std::uint64_t nbytes,
                               const Stream& stream);

struct PoolStats {
  std::uint64_t active_blocks = 0;
  std::uint64_t held_blocks = 0;
  std::uint64_t bytes_active = 0;
  std::uint64_t bytes_held = 0;
  std::uint64_t requests = 0;  // pool_allocate calls
  std::uint64_t reuses = 0;    // requests served from a held block

  friend bool operator==(const PoolStats&, const PoolStats&) = default;
};

/// Power-of-two bin of a request, at least 256 bytes.
std::uint64_t pool_bin_size(std::uint64_t nbytes);

/// A binning pool over one context's arena. Copies share the same pool.
class MemoryPool {
 public:
  explicit MemoryPool(Context& ctx);

  /// Reuses a held block of the request's bin, else allocates the bin size
  /// from the arena.
  DeviceAllocation allocate(std::uint64_t nbytes);
  /// Returns every held block to the arena; the number returned.
  std::size_t free_held();
  PoolStats stats() const;

  friend bool operator==(const MemoryPool& a, const MemoryPool& b) noexcept { return a.state_ == b.state_; }

 private:
  friend MemoryPool default_pool(Context& ctx);
  MemoryPool(std::shared_ptr<detail::ContextImpl> ctx, std::shared_ptr<detail::PoolState> state)
      : ctx_(std::move(ctx)), state_(std::move(state)) {}

  std::shared_ptr<detail::ContextImpl> ctx_;
  std::shared_ptr<detail::PoolState> state_;
};

inline DeviceAllocation pool_allocate(MemoryPool& pool, std::uint64_t nbytes) { return pool.allocate(nbytes); }
/// Moves a pooled block from active to held.
inline void pool_release(DeviceAllocation& a) noexcept { a.release(); }
inline std::size_t pool_free_held(MemoryPool& pool) { return pool.free_held(); }
inline PoolStats pool_stats(const MemoryPool& pool) { return pool.stats(); }

/// The per-context pool that device arrays allocate from.
MemoryPool default_pool(Context& ctx);

}  // namespace simt

#endif  // SIMT_MEMORY_HPP
