#include "simt/kernel_gen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "kernel_gen/source_builder.hpp"

namespace simt {

namespace {

using detail::SourceBuilder;

constexpr std::uint64_t max_length = std::numeric_limits<std::uint32_t>::max();

void check_identifier(std::string_view name) {
  bool ok = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
  for (char c : name) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
  if (!ok) throw ArgumentError("kernel name '" + std::string(name) + "' is not an identifier");
}

std::string c_type(DType d) { return c_name(scalar_of(d)); }

RawArg raw_of(const Number& n) {
  switch (n.kind()) {
    case Number::Kind::integer: return RawArg(n.as_integer());
    case Number::Kind::real: return RawArg(n.as_real());
    case Number::Kind::complex: return RawArg(n.as_complex());
  }
  return RawArg(0);
}

/// Binds generated-kernel arguments to parameters [first, first+count) of
/// the signature, returning the common array length.
std::uint64_t bind_arguments(const KernelHandle& h, std::span<const KernelArg> args, std::size_t first,
                             std::size_t user_params, std::vector<TaggedValue>& out) {
  const auto& params = h.signature().params;
  if (args.size() != user_params) {
    throw ArgumentError("kernel '" + h.name() + "' expects " + std::to_string(user_params) + " argument(s), got " +
                        std::to_string(args.size()));
  }
  std::optional<std::uint64_t> n;
  for (std::size_t k = 0; k < args.size(); ++k) {
    const auto& [pname, ptype] = params[first + k];
    std::string where = "argument " + std::to_string(k) + " ('" + pname + "') of kernel '" + h.name() + "'";
    if (const DeviceArray* a = args[k].array()) {
      if (!ptype.pointer) throw ArgumentError(where + " is a scalar " + to_string(ptype) + ", got an array");
      if (scalar_of(a->dtype()) != ptype.scalar) {
        throw ArgumentError(where + ": expected an array of " + to_string(ptype.scalar) + ", got " +
                            to_string(a->dtype()));
      }
      if (a->context().impl().get() != h.kernel_ref().owner) {
        throw ArgumentError(where + ": array belongs to a different context");
      }
      if (n && *n != a->size()) {
        throw ShapeError("array arguments of kernel '" + h.name() + "' differ in length: " + std::to_string(*n) +
                         " and " + std::to_string(a->size()));
      }
      n = a->size();
      out.emplace_back(a->ptr());
    } else {
      if (ptype.pointer) throw ArgumentError(where + " is a pointer; pass an array");
      out.push_back(raw_of(*args[k].number()).coerce(tag_for(ptype), k));
    }
  }
  if (!n) throw ArgumentError("kernel '" + h.name() + "' needs at least one array argument to determine n");
  if (*n > max_length) throw ShapeError("length " + std::to_string(*n) + " exceeds the u32 index range");
  return *n;
}

std::uint32_t blocks_for(std::uint64_t n, std::uint32_t block, std::uint32_t cap) {
  std::uint64_t g = (n + block - 1) / block;
  return static_cast<std::uint32_t>(std::clamp<std::uint64_t>(g, 1, cap));
}

}  // namespace

// --- elementwise --------------------------------------------------------------

ElementwiseKernel::ElementwiseKernel(Context& ctx, std::string_view arguments, std::string_view operation,
                                     std::string_view name, std::string_view preamble) {
  check_identifier(name);
  SourceBuilder b;
  if (!preamble.empty()) {
    b.user("<preamble>", preamble);
    b.add("\n");
  }
  b.add("__global__ void " + std::string(name) + "(");
  if (!arguments.empty()) {
    b.user("<arguments>", arguments);
    b.add(", ");
  }
  b.add("unsigned int n)\n{\n  unsigned int i;\n");
  b.add("  for (i = threadIdx.x + blockDim.x * blockIdx.x; i < n; i += blockDim.x * gridDim.x) {\n");
  b.user("<operation>", operation);
  b.add(";\n  }\n}\n");
  source_ = b.text();

  ModuleOptions opts;
  opts.origin = "<elementwise " + std::string(name) + ">";
  CompiledModule m = b.compile(ctx, opts);
  status_ = m.cache_status();
  handle_ = get_function(m, name);
}

void ElementwiseKernel::operator()(std::span<const KernelArg> args, const LaunchPolicy& policy,
                                   std::optional<Stream> stream) const {
  std::vector<TaggedValue> values;
  std::uint64_t n = bind_arguments(handle_, args, 0, signature().params.size() - 1, values);
  if (n == 0) return;
  if (policy.block == 0 || policy.max_grid == 0) throw InvalidLaunchConfig("launch policy dimensions must be positive");
  values.emplace_back(static_cast<std::uint32_t>(n));
  handle_(Dim3(blocks_for(n, policy.block, policy.max_grid)), Dim3(policy.block), values, std::move(stream));
}

// --- reduction ----------------------------------------------------------------

ReductionKernel::ReductionKernel(Context& ctx, DType out, std::string_view neutral, std::string_view reduce_expr,
                                 std::string_view map_expr, std::string_view arguments, std::string_view name,
                                 std::string_view preamble)
    : out_(out) {
  check_identifier(name);
  const std::string t = c_type(out);
  const std::string n(name);
  const std::string bs = std::to_string(block_size);
  SourceBuilder b;
  if (!preamble.empty()) {
    b.user("<preamble>", preamble);
    b.add("\n");
  }
  b.add("__device__ " + t + " " + n + "_combine(" + t + " a, " + t + " b)\n{\n  return ");
  b.user("<reduce_expr>", reduce_expr);
  b.add(";\n}\n");

  // Both stages share one body and differ in the mapped value.
  auto stage = [&](const std::string& entry, bool first) {
    b.add("__global__ void " + entry + "(" + t + " *simt_partials, ");
    if (first) {
      if (!arguments.empty()) {
        b.user("<arguments>", arguments);
        b.add(", ");
      }
    } else {
      b.add(t + " *simt_in, ");
    }
    b.add("unsigned int n)\n{\n");
    b.add("  __shared__ " + t + " simt_sdata[" + bs + "];\n");
    b.add("  unsigned int simt_tid = threadIdx.x;\n");
    b.add("  unsigned int i = blockIdx.x * blockDim.x + threadIdx.x;\n");
    b.add("  " + t + " simt_acc = ");
    b.user("<neutral>", neutral);
    b.add(";\n  while (i < n) {\n    " + t + " simt_v = ");
    if (first) {
      b.user("<map_expr>", map_expr);
    } else {
      b.add("simt_in[i]");
    }
    b.add(";\n    simt_acc = " + n + "_combine(simt_acc, simt_v);\n");
    b.add("    i += blockDim.x * gridDim.x;\n  }\n");
    b.add("  simt_sdata[simt_tid] = simt_acc;\n  __syncthreads();\n");
    b.add("  for (unsigned int simt_s = blockDim.x / 2; simt_s > 0; simt_s >>= 1) {\n");
    b.add("    if (simt_tid < simt_s) simt_sdata[simt_tid] = " + n +
          "_combine(simt_sdata[simt_tid], simt_sdata[simt_tid + simt_s]);\n");
    b.add("    __syncthreads();\n  }\n");
    b.add("  if (simt_tid == 0) simt_partials[blockIdx.x] = simt_sdata[0];\n}\n");
  };
  stage(n + "_stage1", true);
  stage(n + "_stage2", false);
  source_ = b.text();

  ModuleOptions opts;
  opts.origin = "<reduction " + n + ">";
  CompiledModule m = b.compile(ctx, opts);
  stage1_ = get_function(m, n + "_stage1");
  stage2_ = get_function(m, n + "_stage2");
}

DeviceArray ReductionKernel::operator()(std::span<const KernelArg> args, std::optional<Stream> stream) const {
  std::vector<TaggedValue> values;
  values.emplace_back(DevicePtr{});  // partials, bound below
  std::uint64_t n = bind_arguments(stage1_, args, 1, stage1_.signature().params.size() - 2, values);
  const DeviceArray* any = nullptr;
  for (const auto& a : args) {
    if (a.array()) any = a.array();
  }
  Context ctx = any->context();  // bind_arguments guarantees an array

  std::uint32_t grid = blocks_for(n, block_size, max_blocks);
  DeviceArray partial(ctx, grid == 1 ? Shape{} : Shape{grid}, out_);
  values[0] = partial.ptr();
  values.emplace_back(static_cast<std::uint32_t>(n));
  stage1_(Dim3(grid), Dim3(block_size), values, stream);

  std::uint64_t m = grid;
  while (m > 1) {
    std::uint32_t g = blocks_for(m, block_size, max_blocks);
    DeviceArray next(ctx, g == 1 ? Shape{} : Shape{g}, out_);
    TaggedValue a2[] = {next.ptr(), partial.ptr(), static_cast<std::uint32_t>(m)};
    stage2_(Dim3(g), Dim3(block_size), a2, stream);
    partial = std::move(next);
    m = g;
  }
  return partial;
}

// --- scan ---------------------------------------------------------------------

ScanKernel::ScanKernel(Context& ctx, DType dtype, std::string_view scan_expr, std::string_view neutral,
                       bool inclusive, std::string_view name, std::string_view preamble)
    : dtype_(dtype), inclusive_(inclusive) {
  check_identifier(name);
  const std::string t = c_type(dtype);
  const std::string n(name);
  const std::string half = std::to_string(block_size);
  const std::string full = std::to_string(tile);
  SourceBuilder b;
  if (!preamble.empty()) {
    b.user("<preamble>", preamble);
    b.add("\n");
  }
  b.add("__device__ " + t + " " + n + "_op(" + t + " a, " + t + " b)\n{\n  return ");
  b.user("<scan_expr>", scan_expr);
  b.add(";\n}\n");
  b.add("__device__ " + t + " " + n + "_neutral()\n{\n  return ");
  b.user("<neutral>", neutral);
  b.add(";\n}\n");

  // One tile of 2*blockDim elements per block: upsweep, clear the root,
  // downsweep. The root before clearing is the tile total.
  b.add("__global__ void " + n + "_blocks(" + t + " *simt_out, " + t + " *simt_in, " + t +
        " *simt_sums, unsigned int n, int simt_inclusive)\n{\n");
  b.add("  __shared__ " + t + " simt_tmp[" + full + "];\n");
  b.add("  unsigned int tid = threadIdx.x;\n");
  b.add("  unsigned int base = blockIdx.x * " + full + ";\n");
  b.add("  " + t + " x0 = " + n + "_neutral();\n");
  b.add("  " + t + " x1 = " + n + "_neutral();\n");
  b.add("  if (base + tid < n) x0 = simt_in[base + tid];\n");
  b.add("  if (base + tid + " + half + " < n) x1 = simt_in[base + tid + " + half + "];\n");
  b.add("  simt_tmp[tid] = x0;\n  simt_tmp[tid + " + half + "] = x1;\n");
  b.add("  unsigned int offset = 1;\n");
  b.add("  for (unsigned int d = " + half + "; d > 0; d >>= 1) {\n");
  b.add("    __syncthreads();\n");
  b.add("    if (tid < d) {\n");
  b.add("      unsigned int ai = offset * (2 * tid + 1) - 1;\n");
  b.add("      unsigned int bi = offset * (2 * tid + 2) - 1;\n");
  b.add("      simt_tmp[bi] = " + n + "_op(simt_tmp[ai], simt_tmp[bi]);\n");
  b.add("    }\n    offset *= 2;\n  }\n");
  b.add("  __syncthreads();\n");
  b.add("  if (tid == 0) {\n");
  b.add("    simt_sums[blockIdx.x] = simt_tmp[" + full + " - 1];\n");
  b.add("    simt_tmp[" + full + " - 1] = " + n + "_neutral();\n  }\n");
  b.add("  for (unsigned int d = 1; d < " + full + "; d *= 2) {\n");
  b.add("    offset >>= 1;\n");
  b.add("    __syncthreads();\n");
  b.add("    if (tid < d) {\n");
  b.add("      unsigned int ai = offset * (2 * tid + 1) - 1;\n");
  b.add("      unsigned int bi = offset * (2 * tid + 2) - 1;\n");
  b.add("      " + t + " left = simt_tmp[ai];\n");
  b.add("      simt_tmp[ai] = simt_tmp[bi];\n");
  b.add("      simt_tmp[bi] = " + n + "_op(simt_tmp[bi], left);\n");
  b.add("    }\n  }\n");
  b.add("  __syncthreads();\n");
  b.add("  if (base + tid < n) simt_out[base + tid] = simt_inclusive ? " + n +
        "_op(simt_tmp[tid], x0) : simt_tmp[tid];\n");
  b.add("  if (base + tid + " + half + " < n) simt_out[base + tid + " + half + "] = simt_inclusive ? " + n +
        "_op(simt_tmp[tid + " + half + "], x1) : simt_tmp[tid + " + half + "];\n");
  b.add("}\n");

  // Tile b > 0 is offset by the exclusive prefix of the tile totals.
  b.add("__global__ void " + n + "_add(" + t + " *simt_out, " + t + " *simt_prefix, unsigned int n)\n{\n");
  b.add("  if (blockIdx.x == 0) return;\n");
  b.add("  unsigned int j = blockIdx.x * " + full + " + threadIdx.x;\n");
  b.add("  " + t + " p = simt_prefix[blockIdx.x];\n");
  b.add("  if (j < n) simt_out[j] = " + n + "_op(p, simt_out[j]);\n");
  b.add("  if (j + " + half + " < n) simt_out[j + " + half + "] = " + n + "_op(p, simt_out[j + " + half + "]);\n");
  b.add("}\n");
  source_ = b.text();

  ModuleOptions opts;
  opts.origin = "<scan " + n + ">";
  CompiledModule m = b.compile(ctx, opts);
  blocks_ = get_function(m, n + "_blocks");
  add_ = get_function(m, n + "_add");
}

void ScanKernel::scan_into(const DeviceArray& in, DeviceArray& out, bool inclusive,
                           const std::optional<Stream>& stream) const {
  std::uint64_t n = in.size();
  std::uint64_t tiles = (n + tile - 1) / tile;
  if (tiles > in.context().limits().max_grid_dim) {
    throw ShapeError("scan input of " + std::to_string(n) + " elements exceeds " +
                     std::to_string(std::uint64_t{in.context().limits().max_grid_dim} * tile));
  }
  DeviceArray sums(in.context(), Shape{tiles}, dtype_);
  TaggedValue a[] = {out.ptr(), in.ptr(), sums.ptr(), static_cast<std::uint32_t>(n),
                     static_cast<std::int32_t>(inclusive)};
  blocks_(Dim3(static_cast<std::uint32_t>(tiles)), Dim3(block_size), a, stream);
  if (tiles > 1) {
    DeviceArray prefix(in.context(), Shape{tiles}, dtype_);
    scan_into(sums, prefix, false, stream);
    TaggedValue b[] = {out.ptr(), prefix.ptr(), static_cast<std::uint32_t>(n)};
    add_(Dim3(static_cast<std::uint32_t>(tiles)), Dim3(block_size), b, stream);
  }
}

DeviceArray ScanKernel::operator()(const DeviceArray& input, std::optional<Stream> stream) const {
  if (input.ndim() != 1) throw ShapeError("scan input must be 1-D, got shape " + to_string(input.shape()));
  if (input.dtype() != dtype_) {
    throw DTypeError(std::string("scan kernel is for ") + to_string(dtype_) + ", got " + to_string(input.dtype()));
  }
  if (input.context().impl().get() != blocks_.kernel_ref().owner) {
    throw ArgumentError("scan input belongs to a different context");
  }
  if (input.size() > max_length) throw ShapeError("scan input exceeds the u32 index range");
  DeviceArray out(input.context(), input.shape(), dtype_);
  if (input.size() == 0) return out;
  scan_into(input, out, inclusive_, stream);
  return out;
}

// --- substitution -------------------------------------------------------------

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& mapping, bool strict) {
  std::string out;
  out.reserve(tmpl.size());
  std::vector<std::string> unknown;
  std::map<std::string, bool> used;
  for (std::size_t k = 0; k < tmpl.size(); ++k) {
    char c = tmpl[k];
    if (c != '$' || k + 1 >= tmpl.size()) {
      out += c;
      continue;
    }
    if (tmpl[k + 1] == '$') {
      out += '$';
      ++k;
      continue;
    }
    if (tmpl[k + 1] != '{') {
      out += c;
      continue;
    }
    std::size_t close = tmpl.find('}', k + 2);
    if (close == std::string_view::npos) {
      throw SubstitutionError("unterminated placeholder starting at offset " + std::to_string(k));
    }
    std::string name(tmpl.substr(k + 2, close - k - 2));
    auto it = mapping.find(name);
    if (it == mapping.end()) {
      if (std::find(unknown.begin(), unknown.end(), name) == unknown.end()) unknown.push_back(name);
    } else {
      out += it->second;
      used[name] = true;
    }
    k = close;
  }
  std::vector<std::string> unused;
  if (strict) {
    for (const auto& [key, value] : mapping) {
      if (!used.count(key)) unused.push_back(key);
    }
  }
  if (!unknown.empty() || !unused.empty()) {
    std::string msg;
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
      return s;
    };
    if (!unknown.empty()) msg += "unknown placeholder(s): " + list(unknown);
    if (!unused.empty()) msg += std::string(msg.empty() ? "" : "; ") + "unused key(s): " + list(unused);
    throw SubstitutionError(msg);
  }
  return out;
}

// --- autotuning ---------------------------------------------------------------

namespace {

template <class T>
bool close_enough(T a, T b, double rtol, double atol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (a == b) return true;
  return std::fabs(static_cast<double>(a) - static_cast<double>(b)) <= atol + rtol * std::fabs(static_cast<double>(b));
}

template <class T>
bool compare_reals(const HostArray& got, const HostArray& want, double rtol, double atol) {
  std::size_t n = got.data.size() / sizeof(T);
  for (std::size_t k = 0; k < n; ++k) {
    T a;
    T b;
    std::memcpy(&a, got.data.data() + k * sizeof(T), sizeof(T));
    std::memcpy(&b, want.data.data() + k * sizeof(T), sizeof(T));
    if (!close_enough(a, b, rtol, atol)) return false;
  }
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

bool outputs_match(const HostArray& got, const HostArray& want, double rtol, double atol) {
  if (got.shape != want.shape || got.dtype != want.dtype || got.data.size() != want.data.size()) return false;
  switch (got.dtype) {
    case DType::i32:
    case DType::i64: return got.data == want.data;
    case DType::f32:
    case DType::c64: return compare_reals<float>(got, want, rtol, atol);
    case DType::f64:
    case DType::c128: return compare_reals<double>(got, want, rtol, atol);
  }
  return false;
}

TuneResult autotune(const std::vector<TuneCandidate>& candidates, const TuneOptions& options) {
  if (candidates.empty()) throw ArgumentError("autotune needs at least one candidate");
  if (options.repeats < 1 || options.warmup < 0) throw ArgumentError("autotune needs repeats >= 1 and warmup >= 0");
  TuneResult result;
  std::optional<std::size_t> best;
  for (const TuneCandidate& c : candidates) {
    TuneRow row;
    row.params = c.params;
    try {
      for (int w = 0; w < options.warmup; ++w) c.run();
      HostArray output;
      for (int r = 0; r < options.repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        output = c.run();
        auto t1 = std::chrono::steady_clock::now();
        row.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      row.median_ms = median(row.samples_ms);
      if (options.reference && !outputs_match(output, *options.reference, options.rtol, options.atol)) {
        row.qualified = false;
        row.note = "output differs from reference";
      }
    } catch (const Error& e) {
      row.qualified = false;
      row.note = e.what();
    }
    std::size_t index = result.table.size();
    if (row.qualified && (!best || row.median_ms < result.table[*best].median_ms)) best = index;
    result.table.push_back(std::move(row));
  }
  if (!best) throw TuneError("every autotune candidate was disqualified");
  result.best = *best;
  result.best_params = result.table[*best].params;
  return result;
}

}  // namespace simt
