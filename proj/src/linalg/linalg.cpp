#include "simt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "device_array/registry.hpp"
#include "simt/source_module.hpp"

namespace simt {

namespace {

constexpr std::uint32_t spmv_block = 256;

void check_real(DType d, const char* what) {
  if (d != DType::f32 && d != DType::f64) {
    throw DTypeError(std::string(what) + " supports f32 and f64, got " + to_string(d));
  }
}

const KernelHandle& spmv_kernel(Context& ctx, DType d) {
  std::string t = c_name(scalar_of(d));
  std::string name = std::string("csr_spmv_") + to_string(d);
  return detail::registered<KernelHandle>(ctx, name, [&] {
    std::string src =
        "__global__ void " + name + "(" + t + " *y, int *row_ptr, int *col_idx, " + t + " *values, " + t +
        " *x, unsigned int n_rows)\n"
        "{\n"
        "  for (unsigned int row = blockIdx.x * blockDim.x + threadIdx.x; row < n_rows;\n"
        "       row += blockDim.x * gridDim.x) {\n"
        "    " + t + " acc = 0;\n"
        "    for (int k = row_ptr[row]; k < row_ptr[row + 1]; ++k) acc += values[k] * x[col_idx[k]];\n"
        "    y[row] = acc;\n"
        "  }\n"
        "}\n";
    ModuleOptions opts;
    opts.origin = "<" + name + ">";
    return get_function(source_module(ctx, src, opts), name);
  });
}

double host_scalar(const DeviceArray& a) {
  HostArray h = a.get();
  return h.dtype == DType::f32 ? static_cast<double>(h.item<float>()) : h.item<double>();
}

}  // namespace

CsrMatrix csr_from_coo(Context& ctx, std::span<const Triplet> triplets, std::uint64_t rows, std::uint64_t cols,
                       DType dtype) {
  check_real(dtype, "csr_from_coo");
  constexpr std::uint64_t index_limit = std::numeric_limits<std::int32_t>::max();
  if (rows > index_limit || cols > index_limit) throw ArgumentError("matrix dimensions exceed the i32 index range");
  std::vector<Triplet> t(triplets.begin(), triplets.end());
  for (const Triplet& e : t) {
    if (e.row >= rows || e.col >= cols) {
      throw IndexError("entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) + ") outside a " +
                       std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
    }
  }
  std::stable_sort(t.begin(), t.end(),
                   [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });

  std::vector<std::int32_t> row_ptr(rows + 1, 0);
  std::vector<std::int32_t> col_idx;
  std::vector<double> values;
  for (std::size_t k = 0; k < t.size();) {
    std::size_t j = k;
    double v = 0;
    while (j < t.size() && t[j].row == t[k].row && t[j].col == t[k].col) v += t[j++].value;
    if (col_idx.size() >= index_limit) throw ArgumentError("matrix has too many nonzeros for i32 indices");
    col_idx.push_back(static_cast<std::int32_t>(t[k].col));
    values.push_back(v);
    ++row_ptr[t[k].row + 1];
    k = j;
  }
  for (std::uint64_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];

  CsrMatrix m{rows,
              cols,
              col_idx.size(),
              dtype,
              to_device(ctx, HostArray::from(row_ptr)),
              to_device(ctx, HostArray::from(col_idx)),
              dtype == DType::f64 ? to_device(ctx, HostArray::from(values))
                                  : to_device(ctx, HostArray::from(std::vector<float>(values.begin(), values.end())))};
  return m;
}

DeviceArray spmv(const CsrMatrix& a, const DeviceArray& x) {
  if (x.ndim() != 1 || x.size() != a.n_cols) {
    throw ShapeError("spmv: matrix has " + std::to_string(a.n_cols) + " columns, vector has shape " +
                     to_string(x.shape()));
  }
  if (x.dtype() != a.dtype) {
    throw DTypeError(std::string("spmv: matrix is ") + to_string(a.dtype) + ", vector is " + to_string(x.dtype()));
  }
  Context& ctx = x.context();
  DeviceArray y(ctx, Shape{a.n_rows}, a.dtype);
  if (a.n_rows == 0) return y;
  const KernelHandle& k = spmv_kernel(ctx, a.dtype);
  std::uint64_t blocks = (a.n_rows + spmv_block - 1) / spmv_block;
  std::uint32_t grid = static_cast<std::uint32_t>(std::min<std::uint64_t>(blocks, ctx.limits().max_grid_dim));
  TaggedValue args[] = {y.ptr(), a.row_ptr.ptr(), a.col_idx.ptr(), a.values.ptr(), x.ptr(),
                        static_cast<std::uint32_t>(a.n_rows)};
  k(Dim3(grid), Dim3(spmv_block), args);
  return y;
}

CgResult cg(const CsrMatrix& a, const DeviceArray& b, double tol, int max_iter) {
  if (a.n_rows != a.n_cols) throw ShapeError("cg needs a square matrix");
  if (b.ndim() != 1 || b.size() != a.n_rows) throw ShapeError("cg: right-hand side has shape " + to_string(b.shape()));
  check_real(b.dtype(), "cg");

  Context& ctx = b.context();
  CgResult out{zeros(ctx, b.shape(), b.dtype()), CgReport{}};
  CgReport& rep = out.report;
  double rr = host_scalar(dot(b, b));
  rep.rhs_norm = std::sqrt(rr);
  if (rep.rhs_norm == 0) {
    rep.converged = true;
    return out;
  }
  DeviceArray r = b.copy();
  DeviceArray p = b.copy();
  rep.residual_norm = rep.rhs_norm;
  const double target = tol * rep.rhs_norm;
  for (int it = 1; it <= max_iter; ++it) {
    DeviceArray ap = spmv(a, p);
    double alpha = rr / host_scalar(dot(p, ap));
    out.x = out.x + alpha * p;
    r = r - alpha * ap;
    double rr_new = host_scalar(dot(r, r));
    rep.iterations = it;
    rep.residual_norm = std::sqrt(rr_new);
    if (rep.residual_norm <= target) {
      rep.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return out;
}

CooText read_coo(std::istream& in) {
  CooText m;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  };
  auto fail = [&](const std::string& why) -> void {
    throw FormatError("COO line " + std::to_string(line_no) + ": " + why);
  };
  if (!next_line()) throw FormatError("COO input is empty");
  std::uint64_t nnz = 0;
  {
    std::istringstream h(line);
    std::string extra;
    if (!(h >> m.rows >> m.cols >> nnz) || (h >> extra)) fail("expected header 'rows cols nnz'");
  }
  m.triplets.reserve(std::min<std::uint64_t>(nnz, 1 << 20));
  for (std::uint64_t k = 0; k < nnz; ++k) {
    if (!next_line()) fail("expected " + std::to_string(nnz) + " entries, found " + std::to_string(k));
    std::istringstream e(line);
    Triplet t;
    std::string extra;
    if (!(e >> t.row >> t.col >> t.value) || (e >> extra)) fail("expected 'row col value'");
    m.triplets.push_back(t);
  }
  if (next_line()) fail("unexpected data after " + std::to_string(nnz) + " entries");
  return m;
}

void write_coo(std::ostream& out, const CooText& m) {
  out << m.rows << ' ' << m.cols << ' ' << m.triplets.size() << '\n';
  out.precision(17);
  for (const Triplet& t : m.triplets) out << t.row << ' ' << t.col << ' ' << t.value << '\n';
}

}  // namespace simt
