#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "simt/linalg.hpp"
#include "support.hpp"

using namespace simt;
using test::env_context;

namespace {

std::vector<Triplet> poisson(std::uint64_t n) {
  std::vector<Triplet> t;
  for (std::uint64_t k = 0; k < n; ++k) {
    if (k > 0) t.push_back({k, k - 1, -1});
    t.push_back({k, k, 2});
    if (k + 1 < n) t.push_back({k, k + 1, -1});
  }
  return t;
}

std::vector<double> host_spmv(const std::vector<Triplet>& t, std::uint64_t rows, const std::vector<double>& x) {
  std::vector<double> y(rows, 0.0);
  for (const Triplet& e : t) y[e.row] += e.value * x[e.col];
  return y;
}

DeviceArray f64_array(Context& ctx, std::vector<double> v) { return to_device(ctx, HostArray::from(std::move(v))); }

double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Csr, Examples) {
  Context ctx = env_context();
  std::vector<Triplet> one{{0, 0, 2}};
  CsrMatrix a = csr_from_coo(ctx, one, 1, 1, DType::f64);
  EXPECT_EQ(a.row_ptr.get().values<std::int32_t>(), (std::vector<std::int32_t>{0, 1}));
  EXPECT_EQ(a.col_idx.get().values<std::int32_t>(), (std::vector<std::int32_t>{0}));
  EXPECT_EQ(a.values.get().values<double>(), (std::vector<double>{2}));

  std::vector<Triplet> dup{{1, 0, 1}, {0, 1, 5}, {1, 0, 2}};
  CsrMatrix d = csr_from_coo(ctx, dup, 2, 2, DType::f32);
  EXPECT_EQ(d.nnz, 2u);
  EXPECT_EQ(d.row_ptr.get().values<std::int32_t>(), (std::vector<std::int32_t>{0, 1, 2}));
  EXPECT_EQ(d.col_idx.get().values<std::int32_t>(), (std::vector<std::int32_t>{1, 0}));
  EXPECT_EQ(d.values.get().values<float>(), (std::vector<float>{5, 3}));

  std::vector<Triplet> eye{{2, 2, 1}, {0, 0, 1}, {1, 1, 1}};
  CsrMatrix i = csr_from_coo(ctx, eye, 3, 3, DType::f64);
  EXPECT_EQ(i.row_ptr.get().values<std::int32_t>(), (std::vector<std::int32_t>{0, 1, 2, 3}));
  EXPECT_EQ(i.col_idx.get().values<std::int32_t>(), (std::vector<std::int32_t>{0, 1, 2}));

  CsrMatrix empty = csr_from_coo(ctx, {}, 3, 2, DType::f64);
  EXPECT_EQ(empty.row_ptr.get().values<std::int32_t>(), (std::vector<std::int32_t>{0, 0, 0, 0}));
}

TEST(Csr, Rejections) {
  Context ctx = env_context();
  std::vector<Triplet> out_of_range{{3, 0, 1}};
  EXPECT_THROW(csr_from_coo(ctx, out_of_range, 3, 3, DType::f64), IndexError);
  std::vector<Triplet> col_out{{0, 3, 1}};
  EXPECT_THROW(csr_from_coo(ctx, col_out, 3, 3, DType::f64), IndexError);
  EXPECT_THROW(csr_from_coo(ctx, {}, 3, 3, DType::i32), DTypeError);
  EXPECT_THROW(csr_from_coo(ctx, {}, std::uint64_t{1} << 32, 3, DType::f64), ArgumentError);
}

TEST(Spmv, IdentityAndPoisson) {
  Context ctx = env_context();
  std::vector<Triplet> eye;
  for (std::uint64_t k = 0; k < 50; ++k) eye.push_back({k, k, 1});
  std::vector<double> x = test::random_f64(1, 50);
  CsrMatrix i = csr_from_coo(ctx, eye, 50, 50, DType::f64);
  EXPECT_EQ(spmv(i, f64_array(ctx, x)).get().values<double>(), x);

  CsrMatrix p = csr_from_coo(ctx, poisson(64), 64, 64, DType::f64);
  std::vector<double> want(64, 0.0);
  want.front() = want.back() = 1;
  EXPECT_EQ(spmv(p, f64_array(ctx, std::vector<double>(64, 1.0))).get().values<double>(), want);
}

TEST(Spmv, RandomSparseAgainstHost) {
  Context ctx = env_context();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-1, 1);
  for (auto [rows, cols] : {std::pair<std::uint64_t, std::uint64_t>{100, 100}, {37, 80}, {300, 5}}) {
    std::vector<Triplet> t;
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t c = 0; c < cols; ++c) {
        if (rng() % 20 == 0) t.push_back({r, c, val(rng)});
      }
    }
    std::shuffle(t.begin(), t.end(), rng);
    CsrMatrix a = csr_from_coo(ctx, t, rows, cols, DType::f64);
    std::vector<double> x = test::random_f64(rows + cols, cols);
    std::vector<double> got = spmv(a, f64_array(ctx, x)).get().values<double>();
    std::vector<double> want = host_spmv(t, rows, x);
    ASSERT_EQ(got.size(), rows);
    for (std::uint64_t r = 0; r < rows; ++r) EXPECT_NEAR(got[r], want[r], 1e-12) << r;
  }
}

TEST(Spmv, Linearity) {
  Context ctx = env_context();
  std::vector<Triplet> t;
  std::vector<int> v = test::random_i32(2, 400, -4, 4);
  for (std::uint64_t k = 0; k < 400; ++k) t.push_back({k / 20, k % 20, static_cast<double>(v[k])});
  CsrMatrix a = csr_from_coo(ctx, t, 20, 20, DType::f64);
  // Small-integer data keeps every sum exact, so linearity holds bitwise.
  std::vector<int> xi = test::random_i32(3, 20, -8, 8), yi = test::random_i32(4, 20, -8, 8);
  DeviceArray x = f64_array(ctx, std::vector<double>(xi.begin(), xi.end()));
  DeviceArray y = f64_array(ctx, std::vector<double>(yi.begin(), yi.end()));
  EXPECT_EQ(spmv(a, 3.0 * x + y).get(), (3.0 * spmv(a, x) + spmv(a, y)).get());
}

TEST(Spmv, Rejections) {
  Context ctx = env_context();
  CsrMatrix a = csr_from_coo(ctx, poisson(4), 4, 4, DType::f64);
  EXPECT_THROW(spmv(a, zeros(ctx, Shape{5}, DType::f64)), ShapeError);
  EXPECT_THROW(spmv(a, zeros(ctx, Shape{4}, DType::f32)), DTypeError);
  EXPECT_THROW(spmv(a, zeros(ctx, Shape{2, 2}, DType::f64)), ShapeError);
}

TEST(Spmv, SinglePrecision) {
  Context ctx = env_context();
  CsrMatrix a = csr_from_coo(ctx, poisson(10), 10, 10, DType::f32);
  DeviceArray x = full(ctx, Shape{10}, DType::f32, Number(2));
  std::vector<float> want(10, 0.0f);
  want.front() = want.back() = 2;
  EXPECT_EQ(spmv(a, x).get().values<float>(), want);
}

TEST(Cg, IdentityConvergesInOneStep) {
  Context ctx = env_context();
  std::vector<Triplet> eye;
  for (std::uint64_t k = 0; k < 8; ++k) eye.push_back({k, k, 1});
  CsrMatrix a = csr_from_coo(ctx, eye, 8, 8, DType::f64);
  std::vector<double> b = test::random_f64(6, 8);
  CgResult r = cg(a, f64_array(ctx, b), 1e-12, 10);
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.iterations, 1);
  EXPECT_EQ(r.x.get().values<double>(), b);
}

TEST(Cg, TwoByTwoAgainstClosedForm) {
  Context ctx = env_context();
  std::vector<Triplet> t{{0, 0, 4}, {0, 1, 1}, {1, 0, 1}, {1, 1, 3}};
  CsrMatrix a = csr_from_coo(ctx, t, 2, 2, DType::f64);
  CgResult r = cg(a, f64_array(ctx, {1, 2}), 1e-14, 10);
  ASSERT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, 2);
  std::vector<double> x = r.x.get().values<double>();
  EXPECT_NEAR(x[0], 1.0 / 11, 1e-12);
  EXPECT_NEAR(x[1], 7.0 / 11, 1e-12);
}

TEST(Cg, PoissonWithCertificate) {
  Context ctx = env_context();
  const std::uint64_t n = 64;
  std::vector<Triplet> t = poisson(n);
  CsrMatrix a = csr_from_coo(ctx, t, n, n, DType::f64);
  std::vector<double> b = test::random_f64(7, n);
  const double tol = 1e-10;
  CgResult r = cg(a, f64_array(ctx, b), tol, 1000);
  ASSERT_TRUE(r.report.converged);
  EXPECT_LE(r.report.iterations, static_cast<int>(n));
  // Independent certificate: the true residual, computed on the host.
  std::vector<double> ax = host_spmv(t, n, r.x.get().values<double>());
  std::vector<double> res(n);
  for (std::uint64_t k = 0; k < n; ++k) res[k] = b[k] - ax[k];
  EXPECT_LE(norm2(res), tol * norm2(b) * (1 + 1e-8) + 1e-14);
  EXPECT_NEAR(r.report.rhs_norm, norm2(b), 1e-12);
}

TEST(Cg, ZeroRhsAndBudget) {
  Context ctx = env_context();
  CsrMatrix a = csr_from_coo(ctx, poisson(32), 32, 32, DType::f64);
  CgResult z = cg(a, zeros(ctx, Shape{32}, DType::f64), 1e-10, 100);
  EXPECT_TRUE(z.report.converged);
  EXPECT_EQ(z.report.iterations, 0);
  EXPECT_EQ(z.x.get().values<double>(), std::vector<double>(32, 0.0));
  CgResult capped = cg(a, full(ctx, Shape{32}, DType::f64, Number(1)), 1e-12, 3);
  EXPECT_FALSE(capped.report.converged);
  EXPECT_EQ(capped.report.iterations, 3);
}

TEST(Coo, ReadAndWrite) {
  std::istringstream in("# a comment\n3 3 2\n\n0 0 1.5\n2 1 -2\n");
  CooText m = read_coo(in);
  EXPECT_EQ(m.rows, 3u);
  EXPECT_EQ(m.cols, 3u);
  ASSERT_EQ(m.triplets.size(), 2u);
  EXPECT_EQ(m.triplets[1].row, 2u);
  EXPECT_EQ(m.triplets[1].col, 1u);
  EXPECT_EQ(m.triplets[1].value, -2.0);
  std::ostringstream out;
  write_coo(out, m);
  std::istringstream again(out.str());
  CooText m2 = read_coo(again);
  EXPECT_EQ(m2.rows, m.rows);
  ASSERT_EQ(m2.triplets.size(), 2u);
  EXPECT_EQ(m2.triplets[0].value, 1.5);

  // Doubles survive the text round trip exactly.
  CooText r{1, 1, {{0, 0, 0.1 + 0.2}}};
  std::ostringstream rout;
  write_coo(rout, r);
  std::istringstream rin(rout.str());
  EXPECT_EQ(read_coo(rin).triplets[0].value, 0.1 + 0.2);
}

TEST(Coo, Malformed) {
  for (const char* text : {"", "3 3\n", "2 2 2\n0 0 1\n", "2 2 1\n0 0 1\n1 1 1\n", "2 2 1\n0 x 1\n", "a b c\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_coo(in), FormatError) << text;
  }
}
