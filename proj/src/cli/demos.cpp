#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "cli/commands.hpp"
#include "simt/cli.hpp"
#include "simt/kernel_gen.hpp"
#include "simt/linalg.hpp"
#include "simt/sarr.hpp"

namespace simt::cli {

namespace {

struct DemoEnv {
  const Globals& g;
  const DemoSpec& spec;
  Context ctx;
  std::ostream& out;
};

template <class T>
void print_values(std::ostream& out, const char* label, const std::vector<T>& v, std::size_t row = 0) {
  out << label << ":";
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (row && k % row == 0) out << "\n ";
    out << ' ' << v[k];
  }
  out << "\n";
}

// Values in [-1, 1) with 24 random bits, exact in f32.
std::vector<float> random_floats(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(static_cast<std::int64_t>(rng() >> 40) - (1 << 23)) * 0x1p-23f;
  return v;
}

const char* doublify_source =
    "__global__ void doublify(float *a)\n"
    "{\n"
    "  int idx = threadIdx.x + threadIdx.y*4;\n"
    "  a[idx] *= 2;\n"
    "}\n";

bool demo_double4x4(DemoEnv& d) {
  std::vector<float> a = random_floats(d.g.data_seed(), 16);
  CompiledModule mod = source_module(d.ctx, doublify_source, d.g.module_options("<doublify>"));
  KernelHandle k = get_function(mod, "doublify");
  DeviceAllocation buf = mem_alloc(d.ctx, a.size() * sizeof(float));
  memcpy_htod(d.ctx, buf, a.data(), buf.size());
  TaggedValue args[] = {buf.ptr()};
  k(Dim3(1, 1), Dim3(4, 4, 1), args);
  std::vector<float> got(a.size());
  memcpy_dtoh(d.ctx, got.data(), buf, buf.size());

  print_values(d.out, "input", a, 4);
  print_values(d.out, "doubled", got, 4);
  bool ok = true;
  for (std::size_t k2 = 0; k2 < a.size(); ++k2) ok = ok && got[k2] == a[k2] * 2;
  return ok;
}

bool demo_gpuarray(DemoEnv& d) {
  std::vector<float> a = random_floats(d.g.data_seed(), 16);
  DeviceArray a_gpu = to_device(d.ctx, HostArray::from(Shape{4, 4}, a));
  std::vector<float> got = (2 * a_gpu).get().values<float>();
  print_values(d.out, "a", a, 4);
  print_values(d.out, "2*a", got, 4);
  bool ok = true;
  for (std::size_t k = 0; k < a.size(); ++k) ok = ok && got[k] == a[k] * 2;
  return ok;
}

bool demo_axpy(DemoEnv& d) {
  const std::size_t n = 10;
  std::vector<float> x = random_floats(d.g.data_seed(), n), y = random_floats(d.g.data_seed() + 1, n);
  const float a = 2.5f;
  ElementwiseKernel axpy(d.ctx, "float a, float *x, float *y, float *z", "z[i] = a*x[i] + y[i]", "axpy");
  DeviceArray xd = to_device(d.ctx, HostArray::from(x)), yd = to_device(d.ctx, HostArray::from(y));
  DeviceArray z(d.ctx, Shape{n}, DType::f32);
  axpy({a, xd, yd, z});
  std::vector<float> got = z.get().values<float>();
  print_values(d.out, "x", x);
  print_values(d.out, "y", y);
  print_values(d.out, "2.5*x+y", got);
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) ok = ok && got[i] == a * x[i] + y[i];
  return ok;
}

bool demo_dot(DemoEnv& d) {
  ReductionKernel dot(d.ctx, DType::f32, "0", "a+b", "x[i]*y[i]", "const float *x, const float *y", "dot");
  DeviceArray x = to_device(d.ctx, HostArray::from(std::vector<float>{1, 2, 3}));
  DeviceArray y = to_device(d.ctx, HostArray::from(std::vector<float>{4, 5, 6}));
  float r = dot({x, y}).get().item<float>();
  d.out << "[1,2,3] . [4,5,6] = " << r << "\n";
  return r == 32.0f;
}

bool demo_scan(DemoEnv& d) {
  std::vector<std::int32_t> in{3, 1, 4, 1, 5};
  DeviceArray a = to_device(d.ctx, HostArray::from(in));
  ScanKernel inc(d.ctx, DType::i32, "a+b", "0", true, "inclusive_add");
  ScanKernel exc(d.ctx, DType::i32, "a+b", "0", false, "exclusive_add");
  std::vector<std::int32_t> gi = inc(a).get().values<std::int32_t>();
  std::vector<std::int32_t> ge = exc(a).get().values<std::int32_t>();
  print_values(d.out, "input", in);
  print_values(d.out, "inclusive", gi);
  print_values(d.out, "exclusive", ge);
  return gi == std::vector<std::int32_t>{3, 4, 8, 9, 14} && ge == std::vector<std::int32_t>{0, 3, 4, 8, 9};
}

// Vector addition where each thread handles `unroll` elements, the body
// assembled as text and spliced into a template.
bool demo_unroll(DemoEnv& d) {
  const int block = 128, unroll = 4, blocks = 8;
  const std::size_t n = static_cast<std::size_t>(block) * unroll * blocks;
  const std::string tmpl =
      "__global__ void add(float *tgt, float *op1, float *op2)\n"
      "{\n"
      "  int idx = threadIdx.x + ${block_size} * ${unroll} * blockIdx.x;\n"
      "${body}"
      "}\n";
  std::string body;
  for (int k = 0; k < unroll; ++k) {
    std::string off = k ? " + " + std::to_string(k * block) : "";
    body += "  tgt[idx" + off + "] = op1[idx" + off + "] + op2[idx" + off + "];\n";
  }
  std::string src =
      substitute(tmpl, {{"block_size", std::to_string(block)}, {"unroll", std::to_string(unroll)}, {"body", body}},
                 true);
  d.out << src;

  std::vector<float> a = random_floats(d.g.data_seed(), n), b = random_floats(d.g.data_seed() + 1, n);
  DeviceArray ad = to_device(d.ctx, HostArray::from(a)), bd = to_device(d.ctx, HostArray::from(b));
  DeviceArray t(d.ctx, Shape{n}, DType::f32);
  KernelHandle k = get_function(source_module(d.ctx, src, d.g.module_options("<unrolled_add>")), "add");
  TaggedValue args[] = {t.ptr(), ad.ptr(), bd.ptr()};
  k(Dim3(blocks), Dim3(block), args);
  std::vector<float> got = t.get().values<float>();
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) bad += got[i] != a[i] + b[i];
  d.out << n << " elements, " << bad << " mismatches\n";
  return bad == 0;
}

CooText poisson_1d(std::uint64_t n) {
  CooText m{n, n, {}};
  for (std::uint64_t i = 0; i < n; ++i) {
    m.triplets.push_back({i, i, 2.0});
    if (i > 0) m.triplets.push_back({i, i - 1, -1.0});
    if (i + 1 < n) m.triplets.push_back({i, i + 1, -1.0});
  }
  return m;
}

bool demo_cg(DemoEnv& d) {
  CooText m;
  if (d.spec.matrix) {
    std::ifstream in(*d.spec.matrix);
    if (!in) throw IoError("cannot open " + *d.spec.matrix);
    m = read_coo(in);
    d.out << "matrix " << *d.spec.matrix << ": ";
  } else {
    m = poisson_1d(64);
    d.out << "1-D Poisson matrix: ";
  }
  d.out << m.rows << "x" << m.cols << ", " << m.triplets.size() << " entries\n";
  CsrMatrix a = csr_from_coo(d.ctx, m.triplets, m.rows, m.cols, DType::f64);
  DeviceArray b = d.spec.rhs ? to_device(d.ctx, load_sarr(*d.spec.rhs)) : full(d.ctx, Shape{m.rows}, DType::f64, Number(1.0));
  CgResult r = cg(a, b, d.spec.tol, d.spec.max_iter);

  // Independent certificate: the true residual, not the recurrence.
  DeviceArray res = b - spmv(a, r.x);
  double true_res = std::sqrt(dot(res, res).get().item<double>());
  std::ostringstream s;
  s << std::setprecision(6) << std::scientific;
  s << "iterations " << r.report.iterations << "\n"
    << "recurrence residual " << r.report.residual_norm << "\n"
    << "true residual " << true_res << " (tol * |b| = " << d.spec.tol * r.report.rhs_norm << ")\n"
    << "converged " << (r.report.converged ? "yes" : "no") << "\n";
  d.out << s.str();
  return r.report.converged && true_res <= d.spec.tol * r.report.rhs_norm * (1 + 1e-8);
}

const std::map<std::string, std::function<bool(DemoEnv&)>>& demos() {
  static const std::map<std::string, std::function<bool(DemoEnv&)>> table{
      {"double4x4", demo_double4x4}, {"gpuarray", demo_gpuarray}, {"axpy", demo_axpy}, {"dot", demo_dot},
      {"scan", demo_scan},           {"unroll", demo_unroll},     {"cg", demo_cg},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names{"double4x4", "gpuarray", "axpy", "dot", "scan", "unroll", "cg"};
  return names;
}

int cmd_demo(const Globals& g, const DemoSpec& spec, std::ostream& out, std::ostream& err) {
  auto it = demos().find(spec.name);
  if (it == demos().end()) {
    err << "simtrt: unknown demo '" << spec.name << "'; valid demos:";
    for (const std::string& n : demo_names()) err << ' ' << n;
    err << "\n";
    return exit_usage;
  }
  DemoEnv d{g, spec, g.context(), out};
  bool ok = it->second(d);
  out << (ok ? "PASS" : "FAIL") << " " << spec.name << "\n";
  // A failed self-check is a wrong device result.
  return ok ? exit_ok : exit_launch;
}

}  // namespace simt::cli
