#include "simt/memory.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <vector>

#include "device/context_impl.hpp"

namespace simt {

namespace detail {

/// Pool bookkeeping, guarded by the owning context's mutex. Holds the
/// context weakly (by raw pointer): every handle that can reach the pool
/// also owns the context.
struct PoolState {
  ContextImpl* ctx = nullptr;
  std::map<std::uint64_t, std::vector<std::uint64_t>> held;  // bin size -> bases
  PoolStats stats;

  explicit PoolState(ContextImpl* c) : ctx(c) {}

  ~PoolState() {
    std::lock_guard lock(ctx->mu);
    free_held_locked();
  }

  std::size_t free_held_locked() {
    std::size_t n = 0;
    if (!held.empty()) ctx->drain_all_locked();
    for (auto& [bin, bases] : held) {
      for (std::uint64_t b : bases) ctx->release_locked(b);
      n += bases.size();
      stats.bytes_held -= bin * bases.size();
    }
    held.clear();
    stats.held_blocks = 0;
    return n;
  }
};

}  // namespace detail

using detail::ContextImpl;
using detail::PoolState;

// --- allocations --------------------------------------------------------------

DeviceAllocation::DeviceAllocation(DeviceAllocation&& other) noexcept
    : ctx_(std::move(other.ctx_)),
      pool_(std::move(other.pool_)),
      base_(std::exchange(other.base_, 0)),
      size_(std::exchange(other.size_, 0)),
      capacity_(std::exchange(other.capacity_, 0)) {}

DeviceAllocation& DeviceAllocation::operator=(DeviceAllocation&& other) noexcept {
  if (this != &other) {
    release();
    ctx_ = std::move(other.ctx_);
    pool_ = std::move(other.pool_);
    base_ = std::exchange(other.base_, 0);
    size_ = std::exchange(other.size_, 0);
    capacity_ = std::exchange(other.capacity_, 0);
  }
  return *this;
}

void DeviceAllocation::release() noexcept {
  if (base_ == 0) return;
  {
    std::lock_guard lock(ctx_->mu);
    if (pool_) {
      pool_->held[capacity_].push_back(base_);
      pool_->stats.active_blocks -= 1;
      pool_->stats.bytes_active -= capacity_;
      pool_->stats.held_blocks += 1;
      pool_->stats.bytes_held += capacity_;
    } else {
      // Queued commands may still reference the region.
      ctx_->drain_all_locked();
      ctx_->release_locked(base_);
    }
  }
  base_ = 0;
  size_ = 0;
  capacity_ = 0;
  pool_.reset();
  ctx_.reset();
}

DeviceAllocation mem_alloc(Context& ctx, std::uint64_t nbytes) {
  ContextImpl& impl = ContextImpl::of(ctx);
  DeviceAllocation a;
  {
    std::lock_guard lock(impl.mu);
    a.base_ = impl.allocate_locked(nbytes);
    a.capacity_ = (nbytes + 255) / 256 * 256;
  }
  a.ctx_ = ctx.impl();
  a.size_ = nbytes;
  return a;
}

// --- copies -------------------------------------------------------------------

void memcpy_htod(Context& ctx, DevicePtr dst, const void* src, std::uint64_t nbytes) {
  ContextImpl& impl = ContextImpl::of(ctx);
  std::lock_guard lock(impl.mu);
  impl.synchronize_locked();
  impl.check_range_locked(dst.address, nbytes, "memcpy_htod");
  if (nbytes) std::memcpy(impl.arena.get() + dst.address, src, nbytes);
  ++impl.counters.copies;
}

void memcpy_dtoh(Context& ctx, void* dst, DevicePtr src, std::uint64_t nbytes) {
  ContextImpl& impl = ContextImpl::of(ctx);
  std::lock_guard lock(impl.mu);
  impl.synchronize_locked();
  impl.check_range_locked(src.address, nbytes, "memcpy_dtoh");
  if (nbytes) std::memcpy(dst, impl.arena.get() + src.address, nbytes);
  ++impl.counters.copies;
}

void memcpy_dtod(Context& ctx, DevicePtr dst, DevicePtr src, std::uint64_t nbytes) {
  ContextImpl& impl = ContextImpl::of(ctx);
  std::lock_guard lock(impl.mu);
  impl.synchronize_locked();
  impl.check_range_locked(src.address, nbytes, "memcpy_dtod source");
  impl.check_range_locked(dst.address, nbytes, "memcpy_dtod destination");
  if (nbytes) std::memmove(impl.arena.get() + dst.address, impl.arena.get() + src.address, nbytes);
  ++impl.counters.copies;
}

namespace {

LaunchTicket enqueue_copy(Context& ctx, const Stream& stream, detail::Command cmd) {
  if (!stream.belongs_to(ctx)) throw ArgumentError("stream belongs to a different context");
  ContextImpl& impl = ContextImpl::of(ctx);
  std::lock_guard lock(impl.mu);
  return impl.enqueue_locked(stream.id(), std::move(cmd));
}

}  // namespace

LaunchTicket memcpy_htod_async(Context& ctx, DevicePtr dst, const void* src, std::uint64_t nbytes,
                               const Stream& stream) {
  detail::Command cmd;
  cmd.kind = detail::Command::Kind::htod;
  cmd.dst = dst.address;
  cmd.size = nbytes;
  const auto* p = static_cast<const std::byte*>(src);
  cmd.data.assign(p, p + nbytes);
  return enqueue_copy(ctx, stream, std::move(cmd));
}

LaunchTicket memcpy_dtoh_async(Context& ctx, void* dst, DevicePtr src, std::uint64_t nbytes,
                               const Stream& stream) {
  detail::Command cmd;
  cmd.kind = detail::Command::Kind::dtoh;
  cmd.src = src.address;
  cmd.size = nbytes;
  cmd.host = static_cast<std::byte*>(dst);
  return enqueue_copy(ctx, stream, std::move(cmd));
}

LaunchTicket memcpy_dtod_async(Context& ctx, DevicePtr dst, DevicePtr src, std::uint64_t nbytes,
                               const Stream& stream) {
  detail::Command cmd;
  cmd.kind = detail::Command::Kind::dtod;
  cmd.dst = dst.address;
  cmd.src = src.address;
  cmd.size = nbytes;
  return enqueue_copy(ctx, stream, std::move(cmd));
}

// --- pool ---------------------------------------------------------------------

std::uint64_t pool_bin_size(std::uint64_t nbytes) {
  if (nbytes <= 256) return 256;
  if (nbytes > (std::uint64_t{1} << 63)) throw MemoryError("allocation of " + std::to_string(nbytes) + " bytes too large");
  return std::bit_ceil(nbytes);
}

MemoryPool::MemoryPool(Context& ctx)
    : ctx_(ctx.impl()), state_(std::make_shared<PoolState>(ctx.impl().get())) {}

DeviceAllocation MemoryPool::allocate(std::uint64_t nbytes) {
  if (nbytes == 0) throw ArgumentError("allocation size must be positive");
  std::uint64_t bin = pool_bin_size(nbytes);
  DeviceAllocation a;
  {
    std::lock_guard lock(ctx_->mu);
    PoolStats& st = state_->stats;
    auto it = state_->held.find(bin);
    if (it != state_->held.end() && !it->second.empty()) {
      a.base_ = it->second.back();
      it->second.pop_back();
      if (it->second.empty()) state_->held.erase(it);
      st.held_blocks -= 1;
      st.bytes_held -= bin;
      ++st.reuses;
    } else {
      a.base_ = ctx_->allocate_locked(bin);
    }
    st.active_blocks += 1;
    st.bytes_active += bin;
    ++st.requests;
  }
  a.ctx_ = ctx_;
  a.pool_ = state_;
  a.size_ = nbytes;
  a.capacity_ = bin;
  return a;
}

std::size_t MemoryPool::free_held() {
  std::lock_guard lock(ctx_->mu);
  return state_->free_held_locked();
}

PoolStats MemoryPool::stats() const {
  std::lock_guard lock(ctx_->mu);
  return state_->stats;
}

MemoryPool default_pool(Context& ctx) {
  ContextImpl& impl = ContextImpl::of(ctx);
  std::lock_guard lock(impl.mu);
  if (!impl.default_pool) impl.default_pool = std::make_shared<PoolState>(&impl);
  return MemoryPool(ctx.impl(), std::static_pointer_cast<PoolState>(impl.default_pool));
}

}  // namespace simt
