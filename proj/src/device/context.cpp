#include <charconv>
#include <cstdlib>
#include <cstring>

#include "device/context_impl.hpp"

namespace simt {

namespace detail {

namespace {

constexpr std::uint64_t guard_bytes = 256;
constexpr std::uint64_t alignment = 256;
constexpr std::size_t released_history = 256;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

ContextImpl::ContextImpl(int device_, const ContextConfig& config_)
    : device(device_), config(config_), limits(), stream_rng_(config_.seed) {
  try {
    arena.reset(new std::byte[config.arena_bytes]);
  } catch (const std::bad_alloc&) {
    throw InitError("cannot reserve an arena of " + std::to_string(config.arena_bytes) + " bytes");
  }
  if (config.arena_bytes > guard_bytes) free_ranges.emplace(guard_bytes, config.arena_bytes - guard_bytes);
  streams[0];
  workers_ = std::make_unique<WorkerPool>(config.workers);
}

ContextImpl::~ContextImpl() {
  // Higher-layer objects may call back into the context while dying.
  registry.clear();
  default_pool.reset();
}

std::uint64_t ContextImpl::allocate_locked(std::uint64_t nbytes) {
  if (nbytes == 0) throw ArgumentError("allocation size must be positive");
  if (nbytes > config.arena_bytes) {
    throw MemoryError("cannot allocate " + std::to_string(nbytes) + " bytes: arena holds " +
                      std::to_string(config.arena_bytes));
  }
  std::uint64_t size = (nbytes + alignment - 1) / alignment * alignment;
  for (auto it = free_ranges.begin(); it != free_ranges.end(); ++it) {
    if (it->second < size) continue;
    std::uint64_t base = it->first;
    std::uint64_t rest = it->second - size;
    free_ranges.erase(it);
    if (rest) free_ranges.emplace(base + size, rest);
    live.emplace(base, nbytes);
    ++counters.arena_allocations;
    if (config.debug) std::memset(arena.get() + base, 0xCD, size);
    return base;
  }
  std::uint64_t in_use = 0;
  for (const auto& [b, s] : live) in_use += s;
  throw MemoryError("out of device memory: cannot allocate " + std::to_string(nbytes) + " bytes (" +
                    std::to_string(in_use) + " of " + std::to_string(config.arena_bytes) + " bytes in use)");
}

void ContextImpl::release_locked(std::uint64_t base) noexcept {
  auto it = live.find(base);
  if (it == live.end()) return;
  released.emplace_back(base, it->second);
  std::uint64_t size = (it->second + alignment - 1) / alignment * alignment;
  live.erase(it);
  if (released.size() > released_history) released.pop_front();

  auto next = free_ranges.lower_bound(base);
  std::uint64_t start = base;
  std::uint64_t len = size;
  if (next != free_ranges.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == base) {
      start = prev->first;
      len += prev->second;
      free_ranges.erase(prev);
    }
  }
  if (next != free_ranges.end() && base + size == next->first) {
    len += next->second;
    free_ranges.erase(next);
  }
  free_ranges.emplace(start, len);
}

void ContextImpl::check_range_locked(std::uint64_t addr, std::uint64_t n, const char* what) const {
  if (n == 0) return;
  auto it = live.upper_bound(addr);
  if (it != live.begin()) {
    --it;
    if (addr >= it->first && addr + n >= addr && addr + n <= it->first + it->second) return;
  }
  GlobalMemory view = memory_view();
  throw OutOfBounds(addr, std::string(what) + ": range [" + hex_address(addr) + ", " + hex_address(addr + n) +
                              ") is not within a live allocation (" + describe_address(view, addr, n) + ")");
}

GlobalMemory ContextImpl::memory_view() const {
  GlobalMemory g;
  g.arena = arena.get();
  g.capacity = config.arena_bytes;
  g.live = &live;
  g.released = &released;
  return g;
}

LaunchTicket ContextImpl::enqueue_locked(std::uint32_t stream, Command cmd) {
  auto found = streams.find(stream);
  if (found == streams.end()) throw ArgumentError("unknown stream " + std::to_string(stream));
  auto ticket = std::make_shared<TicketState>();
  ticket->stream = stream;
  ticket->seq = next_seq++;
  ticket->ctx = weak_from_this();
  cmd.seq = ticket->seq;
  cmd.ticket = ticket;
  found->second.queue.push_back(std::move(cmd));
  return LaunchTicket(ticket);
}

void ContextImpl::execute_locked(Command& cmd) {
  StreamState& st = streams[cmd.ticket->stream];
  try {
    switch (cmd.kind) {
      case Command::Kind::launch: {
        LaunchPlan plan;
        plan.program = cmd.kernel.program.get();
        plan.entry = &plan.program->entries[cmd.kernel.entry];
        plan.grid = cmd.cfg.grid;
        plan.block = cmd.cfg.block;
        plan.dynamic_shared = cmd.cfg.shared_bytes;
        plan.args = std::move(cmd.args);
        plan.mode = config.schedule;
        plan.seed = mix(config.seed ^ mix(++launch_ordinal_));
        plan.debug = config.debug;
        counters.blocks += execute(plan, memory_view(), *workers_);
        break;
      }
      case Command::Kind::htod:
        check_range_locked(cmd.dst, cmd.size, "memcpy_htod");
        std::memcpy(arena.get() + cmd.dst, cmd.data.data(), cmd.size);
        ++counters.copies;
        break;
      case Command::Kind::dtoh:
        check_range_locked(cmd.src, cmd.size, "memcpy_dtoh");
        std::memcpy(cmd.host, arena.get() + cmd.src, cmd.size);
        ++counters.copies;
        break;
      case Command::Kind::dtod:
        check_range_locked(cmd.src, cmd.size, "memcpy_dtod source");
        check_range_locked(cmd.dst, cmd.size, "memcpy_dtod destination");
        std::memmove(arena.get() + cmd.dst, arena.get() + cmd.src, cmd.size);
        ++counters.copies;
        break;
    }
  } catch (const Error&) {
    cmd.ticket->error = std::current_exception();
    if (!st.error) {
      st.error = cmd.ticket->error;
      st.error_seq = cmd.seq;
    }
  }
  cmd.ticket->done.store(true, std::memory_order_release);
}

void ContextImpl::drain_all_locked() {
  for (;;) {
    std::vector<StreamState*> ready;
    for (auto& [id, st] : streams) {
      if (!st.queue.empty()) ready.push_back(&st);
    }
    if (ready.empty()) return;
    StreamState* pick = ready.front();
    if (config.schedule == ScheduleMode::shuffled) {
      pick = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(stream_rng_)];
    } else {
      for (StreamState* s : ready) {
        if (s->queue.front().seq < pick->queue.front().seq) pick = s;
      }
    }
    Command cmd = std::move(pick->queue.front());
    pick->queue.pop_front();
    execute_locked(cmd);
  }
}

void ContextImpl::drain_stream_locked(std::uint32_t stream, std::uint64_t up_to) {
  auto found = streams.find(stream);
  if (found == streams.end()) return;
  auto& queue = found->second.queue;
  while (!queue.empty() && queue.front().seq <= up_to) {
    Command cmd = std::move(queue.front());
    queue.pop_front();
    execute_locked(cmd);
  }
}

std::exception_ptr ContextImpl::take_error_locked(std::optional<std::uint32_t> stream) {
  StreamState* first = nullptr;
  for (auto& [id, st] : streams) {
    if (stream && id != *stream) continue;
    if (st.error && (!first || st.error_seq < first->error_seq)) first = &st;
  }
  if (!first) return nullptr;
  std::exception_ptr e = first->error;
  first->error = nullptr;
  return e;
}

void ContextImpl::synchronize_locked() {
  drain_all_locked();
  if (auto e = take_error_locked(std::nullopt)) std::rethrow_exception(e);
}

}  // namespace detail

using detail::ContextImpl;

// --- configuration ------------------------------------------------------------

const char* to_string(ScheduleMode mode) noexcept {
  return mode == ScheduleMode::shuffled ? "shuffled" : "deterministic";
}

ScheduleMode parse_schedule(std::string_view text) {
  if (text == "deterministic") return ScheduleMode::deterministic;
  if (text == "shuffled") return ScheduleMode::shuffled;
  throw ArgumentError("unknown schedule mode '" + std::string(text) + "' (expected deterministic or shuffled)");
}

Environment process_environment() {
  Environment env;
  for (const char* name : {"SIMT_DEVICE", "SIMT_DEVICE_COUNT", "SIMT_WORKERS", "SIMT_SCHEDULE", "SIMT_SEED",
                           "SIMT_CACHE_DIR"}) {
    if (const char* v = std::getenv(name)) env[name] = v;
  }
  return env;
}

namespace {

std::uint64_t parse_unsigned(const Environment& env, const char* name, std::uint64_t fallback) {
  auto it = env.find(name);
  if (it == env.end() || it->second.empty()) return fallback;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw InitError(std::string(name) + " must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

}  // namespace

ContextConfig config_from_environment(const Environment& env, ContextConfig base) {
  base.workers = static_cast<unsigned>(parse_unsigned(env, "SIMT_WORKERS", base.workers));
  base.seed = parse_unsigned(env, "SIMT_SEED", base.seed);
  auto it = env.find("SIMT_SCHEDULE");
  if (it != env.end() && !it->second.empty()) {
    try {
      base.schedule = parse_schedule(it->second);
    } catch (const ArgumentError& e) {
      throw InitError(std::string("SIMT_SCHEDULE: ") + e.what());
    }
  }
  auto dir = env.find("SIMT_CACHE_DIR");
  if (dir != env.end() && !dir->second.empty()) base.cache_dir = dir->second;
  return base;
}

int device_count(const Environment& env) {
  std::uint64_t n = parse_unsigned(env, "SIMT_DEVICE_COUNT", 1);
  if (n < 1 || n > 1024) throw InitError("SIMT_DEVICE_COUNT must be between 1 and 1024");
  return static_cast<int>(n);
}

Context create_context(int device_index, const ContextConfig& config, int count) {
  if (device_index < 0 || device_index >= count) {
    throw InitError("device index " + std::to_string(device_index) + " out of range (" + std::to_string(count) +
                    " device" + (count == 1 ? "" : "s") + ")");
  }
  if (config.workers == 0) throw InitError("worker count must be at least 1");
  if (config.workers > 256) throw InitError("worker count must be at most 256");
  if (config.arena_bytes == 0) throw InitError("arena size must be positive");
  if (config.arena_bytes >= detail::shared_window) throw InitError("arena size too large");
  return Context(std::make_shared<ContextImpl>(device_index, config));
}

Context create_context(int device_index, const ContextConfig& config) {
  return create_context(device_index, config, device_count(process_environment()));
}

Context autoinit(const Environment& env) {
  int count = device_count(env);
  int index = 0;
  auto it = env.find("SIMT_DEVICE");
  if (it != env.end() && !it->second.empty()) {
    std::uint64_t v = 0;
    const std::string& s = it->second;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw InitError("SIMT_DEVICE must be a device index, got '" + s + "'");
    }
    if (v >= static_cast<std::uint64_t>(count)) {
      throw InitError("SIMT_DEVICE=" + s + " but only " + std::to_string(count) + " device" +
                      (count == 1 ? "" : "s") + " available");
    }
    index = static_cast<int>(v);
  }
  return create_context(index, config_from_environment(env), count);
}

Context autoinit() { return autoinit(process_environment()); }

// --- handles ------------------------------------------------------------------

const std::string& KernelRef::name() const { return program->entries.at(static_cast<std::size_t>(entry)).name; }

int Context::device_index() const { return impl_->device; }
const ContextConfig& Context::config() const { return impl_->config; }
const DeviceLimits& Context::limits() const { return impl_->limits; }
std::uint64_t Context::arena_bytes() const { return impl_->config.arena_bytes; }

Stream Context::default_stream() const { return impl_->make_stream(0); }

Stream Context::create_stream() {
  std::lock_guard lock(impl_->mu);
  std::uint32_t id = impl_->next_stream++;
  impl_->streams[id];
  return impl_->make_stream(id);
}

void Context::synchronize() {
  std::lock_guard lock(impl_->mu);
  impl_->synchronize_locked();
}

DeviceCounters Context::counters() const {
  std::lock_guard lock(impl_->mu);
  return impl_->counters;
}

std::size_t Stream::pending() const {
  std::lock_guard lock(ctx_->mu);
  auto it = ctx_->streams.find(id_);
  return it == ctx_->streams.end() ? 0 : it->second.queue.size();
}

void Stream::synchronize() const {
  std::lock_guard lock(ctx_->mu);
  ctx_->drain_stream_locked(id_);
  if (auto e = ctx_->take_error_locked(id_)) std::rethrow_exception(e);
}

std::uint32_t LaunchTicket::stream_id() const noexcept { return state_ ? state_->stream : 0; }

bool LaunchTicket::done() const noexcept { return !state_ || state_->done.load(std::memory_order_acquire); }

std::exception_ptr LaunchTicket::error() const {
  if (!done()) return nullptr;
  return state_->error;
}

void LaunchTicket::wait() const {
  if (done()) return;
  auto ctx = state_->ctx.lock();
  if (!ctx) return;
  std::lock_guard lock(ctx->mu);
  ctx->drain_stream_locked(state_->stream, state_->seq);
}

// --- launch -------------------------------------------------------------------

namespace {

void check_dims(const char* what, Dim3 d) {
  const std::uint32_t v[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (v[a] == 0) {
      throw InvalidLaunchConfig(std::string(what) + " dimension " + static_cast<char>('x' + a) + " is 0");
    }
  }
}

detail::Slot to_slot(const TaggedValue& v) {
  detail::Slot s{};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int32_t>) {
          s.i32 = x;
        } else if constexpr (std::is_same_v<T, std::uint32_t>) {
          s.u32 = x;
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          s.i64 = x;
        } else if constexpr (std::is_same_v<T, float>) {
          s.f32 = x;
        } else if constexpr (std::is_same_v<T, double>) {
          s.f64 = x;
        } else if constexpr (std::is_same_v<T, std::complex<float>>) {
          s.c64 = detail::C64{x.real(), x.imag()};
        } else if constexpr (std::is_same_v<T, std::complex<double>>) {
          s.c128 = detail::C128{x.real(), x.imag()};
        } else {
          s.u64 = x.address;
        }
      },
      v);
  return s;
}

void validate_launch_config(const Context& ctx, const KernelRef& kernel, const LaunchConfig& cfg) {
  const DeviceLimits& lim = ctx.limits();
  check_dims("grid", cfg.grid);
  check_dims("block", cfg.block);
  if (cfg.block.volume() > lim.max_threads_per_block) {
    throw InvalidLaunchConfig("block " + to_string(cfg.block) + " has " + std::to_string(cfg.block.volume()) +
                              " threads; the limit is " + std::to_string(lim.max_threads_per_block));
  }
  if (cfg.block.x > lim.max_block_dim.x || cfg.block.y > lim.max_block_dim.y || cfg.block.z > lim.max_block_dim.z) {
    throw InvalidLaunchConfig("block " + to_string(cfg.block) + " exceeds the per-axis limit " +
                              to_string(lim.max_block_dim));
  }
  if (cfg.grid.x > lim.max_grid_dim || cfg.grid.y > lim.max_grid_dim || cfg.grid.z > lim.max_grid_dim) {
    throw InvalidLaunchConfig("grid " + to_string(cfg.grid) + " exceeds the per-axis limit " +
                              std::to_string(lim.max_grid_dim));
  }
  const detail::EntryInfo& entry = kernel.program->entries.at(static_cast<std::size_t>(kernel.entry));
  std::uint64_t shared = std::uint64_t{entry.static_shared_bytes} + cfg.shared_bytes;
  if (shared > lim.max_shared_bytes) {
    throw InvalidLaunchConfig("kernel '" + entry.name + "' needs " + std::to_string(shared) +
                              " bytes of shared memory; the limit is " + std::to_string(lim.max_shared_bytes));
  }
}

}  // namespace

bool Stream::belongs_to(const Context& ctx) const noexcept { return ctx_ == ctx.impl(); }

LaunchTicket launch(Context& ctx, const KernelRef& kernel, const LaunchConfig& cfg,
                    std::span<const TaggedValue> args, std::optional<Stream> stream) {
  ContextImpl& impl = ContextImpl::of(ctx);
  if (!kernel.program || kernel.entry < 0 ||
      static_cast<std::size_t>(kernel.entry) >= kernel.program->entries.size()) {
    throw ArgumentError("invalid kernel reference");
  }
  if (kernel.owner != &impl) throw ArgumentError("kernel '" + kernel.name() + "' was compiled for a different context");
  const detail::EntryInfo& entry = kernel.program->entries[static_cast<std::size_t>(kernel.entry)];
  const auto& params = entry.signature.params;
  if (args.size() != params.size()) {
    throw ArgumentError("kernel '" + entry.name + "' expects " + std::to_string(params.size()) + " argument" +
                        (params.size() == 1 ? "" : "s") + ", got " + std::to_string(args.size()));
  }
  for (std::size_t k = 0; k < args.size(); ++k) {
    ArgTag want = tag_for(params[k].second);
    ArgTag got = tag_of(args[k]);
    if (want != got) {
      throw ArgumentError("argument " + std::to_string(k) + " ('" + params[k].first + "') of kernel '" + entry.name +
                          "': expected " + to_string(want) + ", got " + to_string(got));
    }
  }
  validate_launch_config(ctx, kernel, cfg);
  std::uint32_t sid = 0;
  if (stream) {
    if (!stream->belongs_to(ctx)) throw ArgumentError("stream belongs to a different context");
    sid = stream->id();
  }

  detail::Command cmd;
  cmd.kind = detail::Command::Kind::launch;
  cmd.kernel = kernel;
  cmd.cfg = cfg;
  cmd.args.reserve(args.size());
  for (const TaggedValue& v : args) cmd.args.push_back(to_slot(v));

  std::lock_guard lock(impl.mu);
  LaunchTicket t = impl.enqueue_locked(sid, std::move(cmd));
  ++impl.counters.launches;
  return t;
}

}  // namespace simt
