#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

#include "cli/commands.hpp"
#include "simt/cli.hpp"
#include "simt/kernel_gen.hpp"

namespace simt::cli {

namespace {

struct Counts {
  std::uint64_t launches = 0;
  std::uint64_t allocations = 0;
};

Counts snapshot(Context& ctx) { return {ctx.counters().launches, default_pool(ctx).stats().requests}; }

Counts operator-(Counts a, Counts b) { return {a.launches - b.launches, a.allocations - b.allocations}; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

std::vector<float> random_floats(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(static_cast<std::int64_t>(rng() >> 40) - (1 << 23)) * 0x1p-23f;
  return v;
}

std::string row(const std::string& variant, double ms, std::uint64_t launches, std::uint64_t allocs,
                const std::string& extra) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %12.3f %9llu %12llu  %s\n", variant.c_str(), ms,
                static_cast<unsigned long long>(launches), static_cast<unsigned long long>(allocs), extra.c_str());
  return buf;
}

// z = a*x + y computed by the array operators (one temporary per
// intermediate) and by a single generated kernel.
bool bench_fusion(Context& ctx, const BenchSpec& spec, std::uint64_t seed, std::ostream& out) {
  const std::size_t n = spec.size;
  const float a = 1.5f;
  std::vector<float> x = random_floats(seed, n), y = random_floats(seed + 1, n);
  std::vector<float> want(n);
  for (std::size_t i = 0; i < n; ++i) want[i] = a * x[i] + y[i];
  DeviceArray xd = to_device(ctx, HostArray::from(x)), yd = to_device(ctx, HostArray::from(y));
  ElementwiseKernel fused(ctx, "float a, float *x, float *y, float *z", "z[i] = a*x[i] + y[i]", "fused_axpy");

  auto unfused_run = [&] { return a * xd + yd; };
  auto fused_run = [&] {
    DeviceArray z(ctx, Shape{n}, DType::f32);
    fused({a, xd, yd, z});
    return z;
  };

  const std::uint64_t outputs = n > 0 ? 1 : 0;
  out << "elementwise-fusion: z = a*x + y, n = " << n << ", f32\n";
  out << "variant         median_ms  launches  allocations  temporaries\n";
  bool ok = true;
  Counts per_run[2];
  for (int v = 0; v < 2; ++v) {
    auto run = [&] { return v == 0 ? unfused_run() : fused_run(); };
    ok = ok && run().get().values<float>() == want;  // also warms the kernel registry
    std::vector<double> samples;
    for (int r = 0; r < spec.repeats; ++r) {
      Counts before = snapshot(ctx);
      auto t0 = std::chrono::steady_clock::now();
      DeviceArray z = run();
      ctx.synchronize();
      auto t1 = std::chrono::steady_clock::now();
      per_run[v] = snapshot(ctx) - before;
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::string temps = std::to_string(per_run[v].allocations - outputs);
    temps.insert(0, temps.size() < 11 ? 11 - temps.size() : 0, ' ');  // under "temporaries"
    out << row(v == 0 ? "unfused" : "fused", median(samples), per_run[v].launches, per_run[v].allocations, temps);
  }
  if (n > 0) {
    ok = ok && per_run[1].launches == 1 && per_run[0].launches >= 2 &&
         per_run[1].allocations < per_run[0].allocations;
  } else {
    ok = ok && per_run[0].launches == 0 && per_run[1].launches == 0 && per_run[0].allocations == 0 &&
         per_run[1].allocations == 0;
  }
  return ok;
}

bool bench_autotune(Context& ctx, const BenchSpec& spec, std::uint64_t seed, std::ostream& out) {
  const std::size_t n = spec.size;
  const float a = 0.75f;
  std::vector<float> x = random_floats(seed, n), y = random_floats(seed + 1, n);
  std::vector<float> want(n);
  for (std::size_t i = 0; i < n; ++i) want[i] = a * x[i] + y[i];
  DeviceArray xd = to_device(ctx, HostArray::from(x)), yd = to_device(ctx, HostArray::from(y));
  DeviceArray z(ctx, Shape{n}, DType::f32);
  ElementwiseKernel axpy(ctx, "float a, float *x, float *y, float *z", "z[i] = a*x[i] + y[i]", "tuned_axpy");

  std::vector<TuneCandidate> candidates;
  std::vector<Counts> counts;
  for (std::uint32_t block : {32u, 64u, 128u, 256u}) {
    std::size_t index = candidates.size();
    counts.emplace_back();
    candidates.push_back({{{"block", std::to_string(block)}}, [&, block, index] {
                            Counts before = snapshot(ctx);
                            LaunchPolicy p{block, ctx.limits().max_grid_dim};
                            axpy({a, xd, yd, z}, p);
                            ctx.synchronize();
                            counts[index] = snapshot(ctx) - before;
                            return z.get();
                          }});
  }
  TuneOptions opts;
  opts.repeats = spec.repeats;
  opts.reference = HostArray::from(want);
  opts.rtol = 0;
  opts.atol = 0;
  TuneResult r = autotune(candidates, opts);

  out << "autotune-block: z = a*x + y, n = " << n << ", f32, block sizes 32 64 128 256\n";
  out << "variant         median_ms  launches  allocations  verified\n";
  bool ok = true;
  for (std::size_t k = 0; k < r.table.size(); ++k) {
    const TuneRow& t = r.table[k];
    ok = ok && t.qualified;
    out << row("block=" + t.params.at("block"), t.median_ms, counts[k].launches, counts[k].allocations,
               t.qualified ? "yes" : "no " + t.note);
  }
  out << "winner block=" << r.best_params.at("block") << "\n";
  return ok && z.get().values<float>() == want;
}

}  // namespace

int cmd_bench(const Globals& g, const BenchSpec& spec, std::ostream& out, std::ostream& err) {
  if (spec.target != "elementwise-fusion" && spec.target != "autotune-block") {
    err << "simtrt: unknown bench target '" << spec.target << "'; valid targets: elementwise-fusion autotune-block\n";
    return exit_usage;
  }
  if (spec.size > (std::uint64_t{1} << 31)) throw ArgumentError("--size is limited to 2^31 elements");
  Context ctx = g.context();
  bool ok = spec.target == "elementwise-fusion" ? bench_fusion(ctx, spec, g.data_seed(), out)
                                                : bench_autotune(ctx, spec, g.data_seed(), out);
  out << (ok ? "PASS" : "FAIL") << " " << spec.target << "\n";
  return ok ? exit_ok : exit_launch;
}

}  // namespace simt::cli
