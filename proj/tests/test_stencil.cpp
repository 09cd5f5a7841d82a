#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fraclap/error.hpp"
#include "fraclap/stencil.hpp"

using namespace fraclap;

TEST(NormConst, ClosedForms) {
  EXPECT_NEAR(norm_const(2, 1.0), 1.0 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(norm_const(3, 1.0), 1.0 / (std::numbers::pi * std::numbers::pi), 1e-15);
  EXPECT_LT(norm_const(2, 2.0 - 1e-9), 1e-8);
  EXPECT_THROW(norm_const(2, 2.0), DomainError);
  EXPECT_THROW(norm_const(4, 1.0), DomainError);
}

TEST(FracParams, Validation) {
  EXPECT_THROW((FracParams{2, 1.0, 1.0}.validate()), DomainError);
  EXPECT_THROW((FracParams{2, 1.0, 2.1}.validate()), DomainError);
  EXPECT_THROW((FracParams{1, 1.0, 2.0}.validate()), DomainError);
  EXPECT_NO_THROW((FracParams{3, 1.5, 1.6}.validate()));
  EXPECT_EQ((FracParams{2, 1.5, 1.6}.correction()), 0);
  EXPECT_EQ((FracParams{2, 1.5, 2.0}.correction()), 1);
}

TEST(Stencil2d, SymmetricAndOriginIdentity) {
  for (double gamma : {2.0, 1.5}) {
    const Stencil st = build_stencil(FracParams{2, 1.2, gamma}, 12, 1.0 / 6);
    for (int m = 0; m <= st.N; ++m)
      for (int n = 0; n <= st.N; ++n) EXPECT_DOUBLE_EQ(st.a(m, n), st.a(n, m));
    EXPECT_NEAR(st.a(0, 0), st.origin_identity(), 1e-12 * std::abs(st.a(0, 0)));
    EXPECT_LT(st.a(0, 0), 0.0);
    EXPECT_GT(st.a(1, 0), 0.0);
  }
}

TEST(Stencil2d, ScalesLikeHToMinusAlpha) {
  const FracParams p{2, 0.7, 2.0};
  const Stencil a = build_stencil(p, 8, 1.0);
  const Stencil b = build_stencil(p, 8, 0.25);
  for (int m = 0; m <= 8; ++m)
    EXPECT_NEAR(b.a(m, 3), std::pow(0.25, -0.7) * a.a(m, 3), 1e-12 * std::abs(b.a(m, 3)));
}

TEST(Stencil2d, ClassicalLimit) {
  const double h = 1.0 / 8;
  const Stencil st = build_stencil(FracParams{2, 1.9999, 2.0}, 16, h);
  EXPECT_NEAR(st.c_norm * st.a(1, 0), 1.0 / (h * h), 0.01 / (h * h));
  for (int m = 0; m <= st.N; ++m)
    for (int n = 0; n <= st.N; ++n)
      if (m + n > 1) EXPECT_LT(std::abs(st.c_norm * st.a(m, n)), 1e-2 / (h * h)) << m << "," << n;
}

TEST(Stencil3d, PermutationSymmetry) {
  const Stencil st = build_stencil(FracParams{3, 0.8, 2.0}, 6, 1.0 / 3);
  for (int m = 0; m <= st.N; ++m)
    for (int n = 0; n <= st.N; ++n)
      for (int s = 0; s <= st.N; ++s) {
        const double v = st.a(m, n, s);
        EXPECT_DOUBLE_EQ(v, st.a(n, m, s));
        EXPECT_DOUBLE_EQ(v, st.a(s, n, m));
        EXPECT_DOUBLE_EQ(v, st.a(m, s, n));
        EXPECT_DOUBLE_EQ(v, st.a(n, s, m));
        EXPECT_DOUBLE_EQ(v, st.a(s, m, n));
      }
  EXPECT_NEAR(st.a(0, 0, 0), st.origin_identity(), 1e-12 * std::abs(st.a(0, 0, 0)));
}

TEST(Stencil3d, ClassicalLimit) {
  const double h = 0.25;
  const Stencil st = build_stencil(FracParams{3, 1.9999, 2.0}, 8, h);
  EXPECT_NEAR(st.c_norm * st.a(1, 0, 0), 1.0 / (h * h), 0.01 / (h * h));
}

TEST(Stencil, RecomputeMatchesTable) {
  const Stencil s2 = build_stencil(FracParams{2, 1.3, 2.0}, 10, 0.2);
  for (std::array<int, 2> idx : {std::array{1, 0}, std::array{0, 1}, std::array{3, 7}, std::array{10, 10}}) {
    const double v = recompute_coefficient(s2, idx, {});
    EXPECT_NEAR(v, s2.a(idx[0], idx[1]), 1e-12 * std::abs(v));
  }
  const Stencil s3 = build_stencil(FracParams{3, 0.6, 1.2}, 5, 0.5);
  const std::array<int, 3> idx{2, 1, 4};
  EXPECT_NEAR(recompute_coefficient(s3, idx, {}), s3.a(2, 1, 4), 1e-12 * std::abs(s3.a(2, 1, 4)));
  EXPECT_THROW(recompute_coefficient(s2, std::array{0, 0}, {}), Error);
}

TEST(Stencil, ThreadCountDoesNotChangeResult) {
  const FracParams p{2, 0.9, 2.0};
  const Stencil a = build_stencil(p, 24, 0.1, {}, 1);
  const Stencil b = build_stencil(p, 24, 0.1, {}, 3);
  EXPECT_EQ(a.coeffs, b.coeffs);
}

TEST(Stencil, RejectsBadMesh) {
  EXPECT_THROW(build_stencil(FracParams{2, 1.0, 2.0}, 0, 0.1), DomainError);
  EXPECT_THROW(build_stencil(FracParams{2, 1.0, 2.0}, 4, -1.0), DomainError);
}
