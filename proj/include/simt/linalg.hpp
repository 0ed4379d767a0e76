#ifndef SIMT_LINALG_HPP
#define SIMT_LINALG_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "simt/device_array.hpp"

namespace simt {

struct Triplet {
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  double value = 0;
};

/// Compressed sparse rows on the device. row_ptr and col_idx are i32.
struct CsrMatrix {
  std::uint64_t n_rows = 0;
  std::uint64_t n_cols = 0;
  std::uint64_t nnz = 0;
  DType dtype = DType::f64;
  DeviceArray row_ptr;
  DeviceArray col_idx;
  DeviceArray values;
};

/// Sorts by (row, col) and sums duplicates. IndexError for entries outside
/// the shape; DTypeError unless dtype is f32 or f64.
CsrMatrix csr_from_coo(Context& ctx, std::span<const Triplet> triplets, std::uint64_t rows, std::uint64_t cols,
                       DType dtype);

/// y = A x with one thread per row.
DeviceArray spmv(const CsrMatrix& a, const DeviceArray& x);

struct CgReport {
  int iterations = 0;
  double residual_norm = 0;  // recurrence residual at exit
  double rhs_norm = 0;
  bool converged = false;     // residual_norm <= tol * rhs_norm
};

struct CgResult {
  DeviceArray x;
  CgReport report;
};

/// Unpreconditioned conjugate gradients from x0 = 0. Not converging within
/// max_iter is reported, not thrown.
CgResult cg(const CsrMatrix& a, const DeviceArray& b, double tol, int max_iter);

/// Matrix in the text form `rows cols nnz` followed by nnz `r c v` lines,
/// 0-based indices.
struct CooText {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<Triplet> triplets;
};

/// FormatError on malformed input.
CooText read_coo(std::istream& in);
void write_coo(std::ostream& out, const CooText& m);

}  // namespace simt

#endif  // SIMT_LINALG_HPP
