#include "simt/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli/commands.hpp"
#include "simt/device_array.hpp"
#include "simt/sarr.hpp"

namespace simt::cli {

Environment Globals::environment() const {
  Environment env = process_environment();
  if (workers) env["SIMT_WORKERS"] = std::to_string(*workers);
  if (schedule) env["SIMT_SCHEDULE"] = *schedule;
  if (seed) env["SIMT_SEED"] = std::to_string(*seed);
  if (device) env["SIMT_DEVICE"] = std::to_string(*device);
  if (cache_dir) env["SIMT_CACHE_DIR"] = *cache_dir;
  return env;
}

Context Globals::context() const { return autoinit(environment()); }

ModuleOptions Globals::module_options(std::string origin) const {
  ModuleOptions o;
  o.cache_dir = default_cache_dir(environment());
  o.origin = std::move(origin);
  return o;
}

std::uint64_t Globals::data_seed() const {
  return config_from_environment(environment()).seed;
}

int exit_code_for(const std::exception& e) noexcept {
  auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return exit_usage;
  switch (err->kind()) {
    case ErrorKind::compile:
      return exit_compile;
    case ErrorKind::invalid_launch_config:
    case ErrorKind::out_of_bounds:
    case ErrorKind::misaligned_access:
    case ErrorKind::barrier_divergence:
    case ErrorKind::trap:
    case ErrorKind::memory:
      return exit_launch;
    default:
      return exit_usage;
  }
}

Dim3 parse_dim3(const std::string& text, const char* what) {
  std::uint32_t v[3] = {1, 1, 1};
  std::size_t n = 0;
  std::string_view rest = text;
  while (true) {
    auto comma = rest.find(',');
    std::string_view part = rest.substr(0, comma);
    std::uint32_t x = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), x);
    if (n == 3 || part.empty() || ec != std::errc() || p != part.data() + part.size() || x == 0) {
      throw ArgumentError(std::string("--") + what + " expects 1 to 3 comma-separated positive integers, got '" + text +
                          "'");
    }
    v[n++] = x;
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return Dim3(v[0], v[1], v[2]);
}

namespace {

template <class T>
T parse_number(std::string_view text, const std::string& binding) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size()) {
    throw ArgumentError("bad value in --arg " + binding);
  }
  return v;
}

struct Binding {
  TaggedValue value;
  // Array bindings get exact-size, unpooled allocations so any access past
  // the file's payload faults.
  std::optional<DeviceAllocation> buffer;
  Shape shape;
  DType dtype = DType::f32;
};

Binding parse_binding(Context& ctx, const std::string& b) {
  auto colon = b.find(':');
  if (colon == std::string::npos) throw ArgumentError("--arg expects kind:value, got '" + b + "'");
  std::string kind = b.substr(0, colon);
  std::string_view v = std::string_view(b).substr(colon + 1);
  if (kind == "arr") {
    HostArray h = load_sarr(std::string(v));
    if (h.data.empty()) throw ArgumentError("--arg " + b + ": empty arrays have no device address");
    DeviceAllocation buf = mem_alloc(ctx, h.data.size());
    memcpy_htod(ctx, buf, h.data.data(), h.data.size());
    DevicePtr p = buf.ptr();
    return Binding{p, std::move(buf), h.shape, h.dtype};
  }
  if (kind == "f32") return Binding{parse_number<float>(v, b), std::nullopt, {}, DType::f32};
  if (kind == "f64") return Binding{parse_number<double>(v, b), std::nullopt, {}, DType::f32};
  if (kind == "i32") return Binding{parse_number<std::int32_t>(v, b), std::nullopt, {}, DType::f32};
  if (kind == "u32") return Binding{parse_number<std::uint32_t>(v, b), std::nullopt, {}, DType::f32};
  if (kind == "i64") return Binding{parse_number<std::int64_t>(v, b), std::nullopt, {}, DType::f32};
  throw ArgumentError("unknown --arg kind '" + kind + "' (expected arr, f32, f64, i32, u32 or i64)");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int cmd_run(const Globals& g, const RunSpec& spec, std::ostream& out, std::ostream&) {
  std::string text = read_text_file(spec.kernel_file);
  Dim3 grid = parse_dim3(spec.grid, "grid");
  Dim3 block = parse_dim3(spec.block, "block");

  // Output bindings are validated before anything touches the device.
  std::vector<std::pair<std::size_t, std::string>> outs;
  for (const std::string& o : spec.outs) {
    auto colon = o.find(':');
    if (colon == std::string::npos) throw ArgumentError("--out expects index:path, got '" + o + "'");
    std::size_t idx = parse_number<std::size_t>(std::string_view(o).substr(0, colon), o);
    if (idx >= spec.args.size() || spec.args[idx].rfind("arr:", 0) != 0) {
      throw ArgumentError("--out " + o + ": parameter " + std::to_string(idx) + " is not an arr binding");
    }
    outs.emplace_back(idx, o.substr(colon + 1));
  }

  Context ctx = g.context();
  ModuleOptions opts = g.module_options(spec.kernel_file);
  opts.no_extern_c = spec.no_extern_c;
  CompiledModule mod = source_module(ctx, text, opts);
  KernelHandle k = get_function(mod, spec.entry);
  const auto& params = k.signature().params;
  if (params.size() != spec.args.size()) {
    throw ArgumentError("kernel '" + spec.entry + "' takes " + std::to_string(params.size()) + " argument(s), got " +
                        std::to_string(spec.args.size()));
  }

  std::vector<Binding> bindings;
  std::vector<TaggedValue> values;
  for (const std::string& b : spec.args) {
    bindings.push_back(parse_binding(ctx, b));
    values.push_back(bindings.back().value);
  }
  k(grid, block, values, std::nullopt, spec.shared_bytes);
  ctx.synchronize();
  out << "ran " << spec.entry << " grid " << to_string(grid) << " block " << to_string(block) << " (cache "
      << to_string(mod.cache_status()) << ")\n";

  for (const auto& [idx, path] : outs) {
    const Binding& b = bindings[idx];
    HostArray h{b.shape, b.dtype, std::vector<std::byte>(b.buffer->size())};
    memcpy_dtoh(ctx, h.data.data(), *b.buffer, h.data.size());
    save_sarr(path, h);
    out << "wrote parameter " << idx << " to " << path << "\n";
  }
  return exit_ok;
}

int cmd_cache(const Globals& g, const std::string& action, std::ostream& out, std::ostream&) {
  // No kernels run here, but malformed settings are still reported.
  (void)g.context();
  std::filesystem::path dir = default_cache_dir(g.environment());
  if (action == "stats") {
    CacheDirStats s = cache_dir_stats(dir);
    out << "cache dir " << dir.string() << "\n"
        << "hits " << s.hits << "\n"
        << "misses " << s.misses << "\n"
        << "entries " << s.entries << "\n";
    return exit_ok;
  }
  if (action == "clear") {
    out << "removed " << cache_clear(dir) << "\n";
    return exit_ok;
  }
  throw ArgumentError("unknown cache action '" + action + "' (expected stats or clear)");
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SIMT kernel runtime: run kernels, demos, cache maintenance and benchmarks", "simtrt"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--cache-dir", g.cache_dir, "compile cache directory (overrides SIMT_CACHE_DIR)");
  app.add_option("--workers", g.workers, "worker threads (overrides SIMT_WORKERS)");
  app.add_option("--schedule", g.schedule, "deterministic or shuffled (overrides SIMT_SCHEDULE)");
  app.add_option("--seed", g.seed, "schedule and demo data seed (overrides SIMT_SEED)");
  app.add_option("--device", g.device, "device index (overrides SIMT_DEVICE)");

  RunSpec run;
  CLI::App* run_cmd = app.add_subcommand("run", "compile a kernel file and launch one entry");
  run_cmd->add_option("kernel", run.kernel_file, "kernel source file")->required();
  run_cmd->add_option("--entry", run.entry, "entry point name")->required();
  run_cmd->add_option("--grid", run.grid, "grid extents x[,y[,z]]");
  run_cmd->add_option("--block", run.block, "block extents x[,y[,z]]");
  run_cmd->add_option("--arg", run.args, "argument: arr:file.sarr, f32:v, f64:v, i32:v, u32:v or i64:v");
  run_cmd->add_option("--out", run.outs, "index:file.sarr, download an arr argument after the launch");
  run_cmd->add_option("--shared", run.shared_bytes, "dynamic shared memory bytes");
  run_cmd->add_flag("--no-extern-c", run.no_extern_c, "compile the text without the extern \"C\" wrapper");

  DemoSpec demo;
  CLI::App* demo_cmd = app.add_subcommand("demo", "run a built-in demo with a self-check");
  demo_cmd->add_option("name", demo.name, "demo name")->required();
  demo_cmd->add_option("--matrix", demo.matrix, "cg: COO text matrix");
  demo_cmd->add_option("--rhs", demo.rhs, "cg: right-hand side .sarr (default all ones)");
  demo_cmd->add_option("--tol", demo.tol, "cg: relative residual tolerance");
  demo_cmd->add_option("--max-iter", demo.max_iter, "cg: iteration limit");

  std::string action;
  CLI::App* cache_cmd = app.add_subcommand("cache", "inspect or clear the compile cache");
  cache_cmd->add_option("action", action, "stats or clear")->required();

  BenchSpec bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "structural benchmarks");
  bench_cmd->add_option("target", bench.target, "elementwise-fusion or autotune-block")->required();
  bench_cmd->add_option("--size", bench.size, "elements per array");
  bench_cmd->add_option("--repeats", bench.repeats, "timed runs per variant")->check(CLI::PositiveNumber);

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*run_cmd) return cmd_run(g, run, out, err);
    if (*demo_cmd) return cmd_demo(g, demo, out, err);
    if (*cache_cmd) return cmd_cache(g, action, out, err);
    return cmd_bench(g, bench, out, err);
  } catch (const CompileError& e) {
    err << e.what() << "\n";
    return exit_compile;
  } catch (const Error& e) {
    err << "simtrt: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "simtrt: " << e.what() << "\n";
    return exit_usage;
  }
}

}  // namespace simt::cli
