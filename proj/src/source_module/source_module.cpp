#include "simt/source_module.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

#include "device/bytecode.hpp"
#include "device/context_impl.hpp"
#include "source_module/serialize.hpp"

namespace simt {

namespace fs = std::filesystem;
using detail::ContextImpl;

namespace detail {

struct ModuleState {
  std::weak_ptr<ContextImpl> ctx;
  const ContextImpl* owner = nullptr;
  lang::KernelModule module;
  std::shared_ptr<const Program> program;
  std::string digest;
  CacheStatus status = CacheStatus::bypassed;
};

struct Prepared {
  std::vector<ArgTag> tags;
  Dim3 block;
  std::uint32_t shared_bytes = 0;
};

struct HandleState {
  std::shared_ptr<const ModuleState> module;
  KernelRef ref;
  const EntryInfo* entry = nullptr;
  mutable std::mutex mu;
  std::optional<Prepared> prepared;
};

}  // namespace detail

namespace {

constexpr std::string_view format_version = "simt-kernel-lang/1;smod/1";
constexpr std::string_view wrapper_open = "extern \"C\" {\n";
constexpr std::string_view wrapper_close = "\n}\n";

std::string compiled_text(std::string_view source, const ModuleOptions& options) {
  if (options.no_extern_c) return std::string(source);
  std::string s;
  s.reserve(source.size() + wrapper_open.size() + wrapper_close.size());
  s += wrapper_open;
  s += source;
  s += wrapper_close;
  return s;
}

bool is_entry_name(const fs::path& p) {
  std::string name = p.filename().string();
  if (name.size() != 64) return false;
  for (char c : name) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

void warn(const std::string& message) { std::cerr << "simt: warning: " << message << '\n'; }

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

/// Writes to a unique temporary in the same directory, then renames over
/// `path`, so concurrent readers never observe a partial entry.
void write_atomically(const fs::path& path, const std::string& bytes) {
  static std::atomic<std::uint64_t> counter{0};
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++) + "." + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

// The directory's counter file holds "hits N\nmisses M\n" and is updated
// under an exclusive flock so concurrent processes do not lose counts.
constexpr const char* counter_file = "counters";

CacheDirStats parse_counters(const std::string& text) {
  CacheDirStats s;
  std::istringstream in(text);
  std::string key;
  std::uint64_t v = 0;
  while (in >> key >> v) {
    if (key == "hits") s.hits = v;
    if (key == "misses") s.misses = v;
  }
  return s;
}

void bump_dir_counter(const fs::path& dir, bool hit) {
  std::string path = (dir / counter_file).string();
  int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) return;
  if (::flock(fd, LOCK_EX) == 0) {
    std::string text;
    char buf[256];
    ssize_t n;
    while ((n = ::read(fd, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
    CacheDirStats s = parse_counters(text);
    (hit ? s.hits : s.misses) += 1;
    std::string out = "hits " + std::to_string(s.hits) + "\nmisses " + std::to_string(s.misses) + "\n";
    if (::ftruncate(fd, 0) == 0 && ::lseek(fd, 0, SEEK_SET) == 0) {
      [[maybe_unused]] ssize_t w = ::write(fd, out.data(), out.size());
    }
    ::flock(fd, LOCK_UN);
  }
  ::close(fd);
}

ContextImpl& live_context(const detail::ModuleState& m, std::shared_ptr<ContextImpl>& keep) {
  keep = m.ctx.lock();
  if (!keep) throw StateError("the context this module was compiled for no longer exists");
  return *keep;
}

}  // namespace

const char* to_string(CacheStatus s) noexcept {
  switch (s) {
    case CacheStatus::hit: return "hit";
    case CacheStatus::miss: return "miss";
    case CacheStatus::bypassed: return "bypassed";
  }
  return "?";
}

std::string_view cache_format_version() noexcept { return format_version; }

std::string cache_key(std::string_view source, const ModuleOptions& options) {
  std::string material = compiled_text(source, options);
  material += '\0';
  material += options.no_extern_c ? "no_extern_c=1" : "no_extern_c=0";
  material += '\0';
  material += format_version;
  return detail::sha256_hex(material);
}

fs::path default_cache_dir(const Environment& env) {
  if (auto it = env.find("SIMT_CACHE_DIR"); it != env.end() && !it->second.empty()) return it->second;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return fs::path(x) / "simt";
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".cache" / "simt";
  return fs::temp_directory_path() / ("simt-cache-" + std::to_string(::getuid()));
}

// --- modules ------------------------------------------------------------------

const lang::KernelModule& CompiledModule::module() const { return state_->module; }
const std::string& CompiledModule::digest() const { return state_->digest; }
CacheStatus CompiledModule::cache_status() const { return state_->status; }

std::vector<std::string> CompiledModule::entry_names() const {
  std::vector<std::string> names;
  for (const auto& e : state_->program->entries) names.push_back(e.name);
  return names;
}

CompiledModule source_module(Context& ctx, std::string_view source, const ModuleOptions& options) {
  ContextImpl& impl = ContextImpl::of(ctx);
  auto state = std::make_shared<detail::ModuleState>();
  state->ctx = ctx.impl();
  state->owner = &impl;
  state->digest = cache_key(source, options);

  const std::string text = compiled_text(source, options);
  lang::ParseOptions parse_options;
  parse_options.first_line = options.no_extern_c ? 1 : 0;

  std::optional<fs::path> dir;
  if (options.use_cache) {
    if (options.cache_dir) dir = *options.cache_dir;
    else if (ctx.config().cache_dir) dir = *ctx.config().cache_dir;
    else dir = default_cache_dir(process_environment());
  }

  bool loaded = false;
  if (dir) {
    fs::path entry = *dir / state->digest;
    if (auto bytes = read_file(entry)) {
      try {
        state->module = detail::deserialize_module(*bytes);
        if (!state->module.typed) throw FormatError("entry holds an untyped module");
        state->module.origin = options.origin;
        loaded = true;
      } catch (const FormatError& e) {
        warn("discarding cache entry " + entry.string() + ": " + e.what() + "; recompiling");
      }
    }
    state->status = loaded ? CacheStatus::hit : CacheStatus::miss;
    {
      std::lock_guard lock(impl.mu);
      (loaded ? impl.cache.hits : impl.cache.misses) += 1;
    }
  }

  if (!loaded) {
    state->module = lang::compile(lang::SourceText{text, options.origin}, parse_options);
    {
      std::lock_guard lock(impl.mu);
      ++impl.cache.compiles;
    }
    if (dir) {
      try {
        std::error_code ec;
        fs::create_directories(*dir, ec);
        write_atomically(*dir / state->digest, detail::serialize_module(state->module));
      } catch (const Error& e) {
        warn(std::string("cannot store cache entry: ") + e.what());
      }
    }
  }
  if (dir) {
    std::error_code ec;
    if (fs::is_directory(*dir, ec)) bump_dir_counter(*dir, loaded);
  }

  state->program = std::make_shared<const detail::Program>(detail::lower(state->module));
  return CompiledModule(std::move(state));
}

// --- handles ------------------------------------------------------------------

KernelHandle get_function(const CompiledModule& module, std::string_view name) {
  const auto& program = module.state_->program;
  for (std::size_t k = 0; k < program->entries.size(); ++k) {
    if (program->entries[k].name != name) continue;
    auto h = std::make_shared<detail::HandleState>();
    h->module = module.state_;
    h->ref.program = program;
    h->ref.entry = static_cast<std::int32_t>(k);
    h->ref.owner = module.state_->owner;
    h->entry = &program->entries[k];
    return KernelHandle(std::move(h));
  }
  if (module.state_->module.find_function(name)) {
    throw NotFound("'" + std::string(name) + "' is a __device__ helper, not a __global__ entry");
  }
  throw NotFound("no kernel entry named '" + std::string(name) + "' in module");
}

const std::string& KernelHandle::name() const { return state_->entry->name; }
const lang::ParamSignature& KernelHandle::signature() const { return state_->entry->signature; }
const KernelRef& KernelHandle::kernel_ref() const { return state_->ref; }

LaunchTicket KernelHandle::operator()(Dim3 grid, Dim3 block, std::span<const TaggedValue> args,
                                      std::optional<Stream> stream, std::uint32_t shared_bytes) const {
  std::shared_ptr<ContextImpl> keep;
  live_context(*state_->module, keep);
  Context ctx(keep);
  return launch(ctx, state_->ref, LaunchConfig{grid, block, shared_bytes}, args, std::move(stream));
}

std::vector<ArgTag> parse_arg_format(std::string_view format) {
  std::vector<ArgTag> tags;
  tags.reserve(format.size());
  for (std::size_t k = 0; k < format.size(); ++k) {
    switch (format[k]) {
      case 'P': tags.push_back(ArgTag::ptr); break;
      case 'i': tags.push_back(ArgTag::i32); break;
      case 'I': tags.push_back(ArgTag::u32); break;
      case 'q': tags.push_back(ArgTag::i64); break;
      case 'f': tags.push_back(ArgTag::f32); break;
      case 'd': tags.push_back(ArgTag::f64); break;
      case 'F': tags.push_back(ArgTag::c64); break;
      case 'D': tags.push_back(ArgTag::c128); break;
      default:
        throw FormatError("invalid argument format character '" + std::string(1, format[k]) + "' at index " +
                          std::to_string(k) + " in \"" + std::string(format) + "\" (valid: PiIqfdFD)");
    }
  }
  return tags;
}

void KernelHandle::prepare(std::string_view format, Dim3 block, std::uint32_t shared_bytes) {
  std::vector<ArgTag> tags = parse_arg_format(format);
  const auto& params = signature().params;
  if (tags.size() != params.size()) {
    throw ArgumentError("format \"" + std::string(format) + "\" has " + std::to_string(tags.size()) +
                        " argument(s) but kernel '" + name() + "' takes " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < tags.size(); ++k) {
    ArgTag want = tag_for(params[k].second);
    if (tags[k] != want) {
      throw ArgumentError("format \"" + std::string(format) + "\" position " + std::to_string(k) + " ('" +
                          params[k].first + "'): kernel expects " + to_string(want) + ", format gives " +
                          to_string(tags[k]));
    }
  }
  std::lock_guard lock(state_->mu);
  state_->prepared = detail::Prepared{std::move(tags), block, shared_bytes};
}

bool KernelHandle::prepared() const {
  std::lock_guard lock(state_->mu);
  return state_->prepared.has_value();
}

LaunchTicket KernelHandle::prepared_call(Dim3 grid, std::span<const RawArg> args, std::optional<Stream> stream,
                                         std::optional<Dim3> block) const {
  detail::Prepared plan;
  {
    std::lock_guard lock(state_->mu);
    if (!state_->prepared) throw StateError("kernel '" + name() + "' must be prepared before prepared_call");
    plan = *state_->prepared;
  }
  if (args.size() != plan.tags.size()) {
    throw ArgumentError("prepared kernel '" + name() + "' expects " + std::to_string(plan.tags.size()) +
                        " argument(s), got " + std::to_string(args.size()));
  }
  std::vector<TaggedValue> values;
  values.reserve(args.size());
  for (std::size_t k = 0; k < args.size(); ++k) values.push_back(args[k].coerce(plan.tags[k], k));
  return (*this)(grid, block.value_or(plan.block), values, std::move(stream), plan.shared_bytes);
}

TaggedValue RawArg::coerce(ArgTag tag, std::size_t position) const {
  auto fail = [&](const char* what) -> TaggedValue {
    throw ArgumentError("prepared argument " + std::to_string(position) + ": cannot pass " + what + " as " +
                        to_string(tag));
  };
  auto fits = [&](std::int64_t lo, std::int64_t hi) {
    if (unsigned_ && static_cast<std::uint64_t>(int_) > static_cast<std::uint64_t>(hi)) return false;
    return unsigned_ || (int_ >= lo && int_ <= hi);
  };
  switch (kind_) {
    case Kind::pointer:
      if (tag == ArgTag::ptr) return ptr_;
      return fail("a pointer");
    case Kind::integer:
      switch (tag) {
        case ArgTag::i32:
          if (!fits(std::numeric_limits<std::int32_t>::min(), std::numeric_limits<std::int32_t>::max())) {
            return fail("an out-of-range integer");
          }
          return static_cast<std::int32_t>(int_);
        case ArgTag::u32:
          if (!fits(0, std::numeric_limits<std::uint32_t>::max())) return fail("an out-of-range integer");
          return static_cast<std::uint32_t>(int_);
        case ArgTag::i64:
          if (!fits(std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max())) {
            return fail("an out-of-range integer");
          }
          return int_;
        case ArgTag::f32: return unsigned_ ? static_cast<float>(static_cast<std::uint64_t>(int_)) : static_cast<float>(int_);
        case ArgTag::f64: return unsigned_ ? static_cast<double>(static_cast<std::uint64_t>(int_)) : static_cast<double>(int_);
        case ArgTag::c64: return std::complex<float>(static_cast<float>(int_), 0.0f);
        case ArgTag::c128: return std::complex<double>(static_cast<double>(int_), 0.0);
        case ArgTag::ptr:
          if (!unsigned_ && int_ < 0) return fail("a negative address");
          return DevicePtr{static_cast<std::uint64_t>(int_)};
      }
      break;
    case Kind::real:
      switch (tag) {
        case ArgTag::f32: return static_cast<float>(real_);
        case ArgTag::f64: return real_;
        case ArgTag::c64: return std::complex<float>(static_cast<float>(real_), 0.0f);
        case ArgTag::c128: return std::complex<double>(real_, 0.0);
        default: return fail("a floating-point number");
      }
    case Kind::complex:
      switch (tag) {
        case ArgTag::c64: return std::complex<float>(complex_);
        case ArgTag::c128: return complex_;
        default: return fail("a complex number");
      }
  }
  return fail("a value");
}

// --- cache inspection ---------------------------------------------------------

CacheStats cache_stats(const Context& ctx) {
  ContextImpl& impl = ContextImpl::of(ctx);
  std::lock_guard lock(impl.mu);
  return CacheStats{impl.cache.hits, impl.cache.misses, impl.cache.compiles};
}

CacheDirStats cache_dir_stats(const fs::path& dir) {
  CacheDirStats s;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return s;
  if (auto text = read_file(dir / counter_file)) s = parse_counters(*text);
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file(ec) && is_entry_name(e.path())) ++s.entries;
  }
  return s;
}

std::size_t cache_clear(const fs::path& dir) {
  std::size_t removed = 0;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return 0;
  std::vector<fs::path> doomed;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (!e.is_regular_file(ec)) continue;
    std::string name = e.path().filename().string();
    bool entry = is_entry_name(e.path());
    bool temp = name.size() > 64 && is_entry_name(name.substr(0, 64)) && name.compare(64, 5, ".tmp.") == 0;
    if (entry || temp || name == counter_file) doomed.push_back(e.path());
    if (entry) ++removed;
  }
  for (const auto& p : doomed) fs::remove(p, ec);
  return removed;
}

}  // namespace simt
