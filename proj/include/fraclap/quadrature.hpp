#pragma once

// Integrals of the power weight |xi|^-p over axis-aligned cells and over the
// exterior of the truncation box. These feed every stencil coefficient.

#include <array>
#include <cstdint>
#include <span>

namespace fraclap {

/// Decay exponent p of the integrand |xi|^-p.
struct WeightExponent {
  double p = 0.0;

  /// Cell weight omega_gamma = |xi|^{gamma-(d+alpha)}, i.e. p = d + alpha - gamma.
  static constexpr WeightExponent for_cells(int d, double alpha, double gamma) {
    return WeightExponent{d + alpha - gamma};
  }
  /// Tail kernel |xi|^-(d+alpha).
  static constexpr WeightExponent for_tail(int d, double alpha) {
    return WeightExponent{d + alpha};
  }
};

/// Axis-aligned box with 0 <= lo[i] < hi[i].
template <int D>
struct Box {
  std::array<double, D> lo{};
  std::array<double, D> hi{};

  bool at_origin() const {
    for (int i = 0; i < D; ++i)
      if (lo[i] != 0.0) return false;
    return true;
  }
  Box scaled(double s) const {
    Box b;
    for (int i = 0; i < D; ++i) {
      b.lo[i] = s * lo[i];
      b.hi[i] = s * hi[i];
    }
    return b;
  }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= hi[i] - lo[i];
    return v;
  }
};

using Box2 = Box<2>;
using Box3 = Box<3>;

struct QuadConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-15;
  std::int64_t max_subdivisions = std::int64_t{1} << 20;

  /// Throws DomainError on rel_tol <= 0, abs_tol < 0 or a non-positive budget.
  void validate() const;
};

/// Integral of |xi|^-p over a 2D cell. Cells with a corner at the origin are
/// reduced to a 1D angular integral; all others use adaptive tensor Gauss.
/// Throws NonIntegrable (origin cell with p >= 2) or BudgetExceeded.
double cell_weight_2d(WeightExponent w, const Box2& cell, const QuadConfig& cfg = {});

/// Integral of |xi|^-p over a 3D cell. The origin cell is split into three
/// pyramids with apex at the origin, and the radial power is integrated exactly.
double cell_weight_3d(WeightExponent w, const Box3& cell, const QuadConfig& cfg = {});

/// Integral of |xi|^-(2+alpha) over the quarter plane minus (0,L)^2.
double tail_weight_2d(double alpha, double L, const QuadConfig& cfg = {});

/// Integral of |xi|^-(3+alpha) over the positive octant minus (0,L)^3.
double tail_weight_3d(double alpha, double L, const QuadConfig& cfg = {});

namespace quad {

/// Gauss-Legendre nodes and weights on [-1, 1] for 1 <= n <= kMaxOrder.
struct GaussRule {
  std::span<const double> nodes;
  std::span<const double> weights;
};
inline constexpr int kMaxOrder = 32;
GaussRule gauss_legendre(int n);

// Pieces of the tail inclusion-exclusion, exposed for testing.
double tail_strip_2d(double alpha, double L);                           // S1 in 2D
double tail_corner_2d(double alpha, double L, const QuadConfig& cfg);   // both coords >= L
double tail_strip_3d(double alpha, double L);                           // one coord >= L
double tail_edge_3d(double alpha, double L, const QuadConfig& cfg);     // two coords >= L
double tail_corner_3d(double alpha, double L, const QuadConfig& cfg);   // all three >= L

}  // namespace quad
}  // namespace fraclap
