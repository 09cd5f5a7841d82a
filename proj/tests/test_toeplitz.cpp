#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "fraclap/error.hpp"
#include "fraclap/toeplitz.hpp"

using namespace fraclap;

namespace {

FractionalOperator make_op(int d, double alpha, double gamma, int N, double a = -1.0, double b = 1.0) {
  const GridSpec g = GridSpec::cube(d, a, b, N);
  return FractionalOperator(build_stencil(FracParams{d, alpha, gamma}, N, g.h), g);
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> N01;
  std::vector<double> v(n);
  for (auto& x : v) x = N01(rng);
  return v;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

}  // namespace

TEST(FftSize, SevenSmooth) {
  EXPECT_EQ(fft_friendly_size(1), 1);
  EXPECT_EQ(fft_friendly_size(11), 12);
  EXPECT_EQ(fft_friendly_size(13), 14);
  EXPECT_EQ(fft_friendly_size(17), 18);
  EXPECT_EQ(fft_friendly_size(64), 64);
  EXPECT_EQ(fft_friendly_size(121), 125);
  EXPECT_EQ(fft_friendly_size(509), 512);
}

TEST(Operator, ZeroInZeroOut) {
  const auto op = make_op(2, 1.1, 2.0, 9);
  std::vector<double> u(op.size(), 0.0), out(op.size(), 1.0);
  op.apply(u, out);
  EXPECT_EQ(max_abs(out), 0.0);
  op.apply_dense(u, out);
  EXPECT_EQ(max_abs(out), 0.0);
}

TEST(Operator, EntriesFollowStencil) {
  const GridSpec g = GridSpec::cube(2, -1, 1, 8);
  const Stencil st = build_stencil(FracParams{2, 0.6, 2.0}, 8, g.h);
  const FractionalOperator op(st, g);
  for (int dy = 0; dy < g.n[1]; ++dy)
    for (int dx = 0; dx < g.n[0]; ++dx) EXPECT_DOUBLE_EQ(op.entry(dx, dy), -st.c_norm * st.a(dx, dy));
}

TEST(Operator, ImpulseGivesColumn) {
  const GridSpec g = GridSpec::cube(2, -1, 1, 8);
  const Stencil st = build_stencil(FracParams{2, 1.4, 2.0}, 8, g.h);
  const FractionalOperator op(st, g);
  const int qi = 2, qj = 5;
  std::vector<double> e(op.size(), 0.0), col(op.size());
  e[g.index(qi, qj)] = 1.0;
  op.apply(e, col);
  for (int j = 0; j < g.n[1]; ++j)
    for (int i = 0; i < g.n[0]; ++i)
      EXPECT_NEAR(col[g.index(i, j)], -st.c_norm * st.a(std::abs(i - qi), std::abs(j - qj)), 1e-12 * st.c_norm * std::abs(st.a(0, 0)));
}

TEST(Operator, BlockToeplitzStructure) {
  const GridSpec g = GridSpec::cube(2, -1, 1, 4);
  ASSERT_EQ(g.size(), 9u);
  const Stencil st = build_stencil(FracParams{2, 1.0, 2.0}, 4, g.h);
  const Eigen::MatrixXd A = dense_matrix(FractionalOperator(st, g));
  ASSERT_EQ(A.rows(), 9);
  for (int p = 0; p < 9; ++p)
    for (int q = 0; q < 9; ++q) {
      const int dx = std::abs(p % 3 - q % 3), dy = std::abs(p / 3 - q / 3);
      EXPECT_DOUBLE_EQ(A(p, q), -st.c_norm * st.a(dx, dy));
      EXPECT_DOUBLE_EQ(A(p, q), A(q, p));
    }
  // block (I, J) depends only on |I - J|
  for (int I = 0; I < 3; ++I)
    for (int J = 0; J < 3; ++J)
      EXPECT_EQ(Eigen::MatrixXd(A.block(3 * I, 3 * J, 3, 3)), Eigen::MatrixXd(A.block(0, 3 * std::abs(I - J), 3, 3)));
}

TEST(Operator, FftMatchesDenseOnRandomCases) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> Ua(0.05, 1.95);
  for (int c = 0; c < 12; ++c) {
    const int d = c % 3 == 0 ? 3 : 2;
    const double alpha = Ua(rng);
    const double gamma = c % 2 ? 2.0 : alpha + (2.0 - alpha) * 0.5;
    const int N = d == 3 ? 4 + c % 5 : 5 + 3 * c;
    const auto op = make_op(d, alpha, gamma, N, -0.5, 1.5);
    const auto u = random_vector(op.size(), rng);
    std::vector<double> f(op.size()), r(op.size());
    op.apply(u, f);
    op.apply_dense(u, r);
    for (std::size_t i = 0; i < f.size(); ++i) r[i] -= f[i];
    EXPECT_LE(max_abs(r), 1e-12 * max_abs(f)) << "d=" << d << " alpha=" << alpha << " N=" << N;
  }
}

TEST(Operator, LinearityAndSymmetry) {
  std::mt19937_64 rng(5);
  const auto op = make_op(2, 0.8, 1.7, 21);
  const auto u = random_vector(op.size(), rng), v = random_vector(op.size(), rng);
  std::vector<double> Au(op.size()), Av(op.size()), w(op.size()), Aw(op.size());
  op.apply(u, Au);
  op.apply(v, Av);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 2.5 * u[i] - 0.75 * v[i];
  op.apply(w, Aw);
  for (std::size_t i = 0; i < w.size(); ++i) Aw[i] -= 2.5 * Au[i] - 0.75 * Av[i];
  EXPECT_LE(max_abs(Aw), 1e-12 * max_abs(Au));
  const double uv = dot(Au, v), vu = dot(u, Av);
  EXPECT_NEAR(uv, vu, 1e-12 * std::abs(uv));
}

TEST(Operator, SingleNode) {
  const GridSpec g = GridSpec::cube(2, 0, 1, 2);
  ASSERT_EQ(g.size(), 1u);
  const Stencil st = build_stencil(FracParams{2, 1.0, 2.0}, 2, g.h);
  const FractionalOperator op(st, g);
  std::vector<double> u{3.0}, out(1);
  op.apply(u, out);
  EXPECT_NEAR(out[0], -st.c_norm * st.a(0, 0) * 3.0, 1e-13 * std::abs(out[0]));
  EXPECT_NEAR(smallest_eigen_check(op), -st.c_norm * st.a(0, 0), 1e-12);
  EXPECT_GT(smallest_eigen_check(op), 0.0);
}

TEST(Operator, PositiveDefinite) {
  const auto op = make_op(2, 1.0, 2.0, 8);
  EXPECT_GT(smallest_eigen_check(op), 0.0);
  EXPECT_TRUE(cholesky_succeeds(op));
  const auto op3 = make_op(3, 0.4, 1.0, 5);
  EXPECT_GT(smallest_eigen_check(op3), 0.0);
  EXPECT_TRUE(cholesky_succeeds(op3));
}

TEST(Operator, ClassicalLimitEigenvalue) {
  const int N = 8;
  const auto op = make_op(2, 1.999, 2.0, N);
  const double h = 2.0 / N, L = 2.0;
  const double s = std::sin(std::numbers::pi * h / (2.0 * L));
  const double five_point = 8.0 / (h * h) * s * s;
  EXPECT_NEAR(smallest_eigen_check(op), five_point, 0.05 * five_point);
}

TEST(Operator, DenseCap) {
  const auto op = make_op(2, 1.0, 2.0, 20);
  std::vector<double> u(op.size(), 1.0), out(op.size());
  EXPECT_THROW(op.apply_dense(u, out, 100), CapExceeded);
  EXPECT_THROW(dense_matrix(op, 100), CapExceeded);
}

TEST(Operator, ShapeMismatch) {
  const auto op = make_op(2, 1.0, 2.0, 6);
  std::vector<double> u(op.size() + 1), out(op.size());
  EXPECT_THROW(op.apply(u, out), ShapeMismatch);
}

TEST(Operator, ConcurrentApplyIsDeterministic) {
  std::mt19937_64 rng(9);
  const auto op = make_op(2, 1.3, 2.0, 40);
  const auto u = random_vector(op.size(), rng);
  std::vector<double> ref(op.size());
  op.apply(u, ref);
  std::vector<std::vector<double>> outs(4, std::vector<double>(op.size()));
  std::vector<std::thread> pool;
  for (auto& o : outs) pool.emplace_back([&] { op.apply(u, o); });
  for (auto& t : pool) t.join();
  for (const auto& o : outs) EXPECT_EQ(o, ref);
}
