#pragma once

#include <cstddef>
#include <vector>

#include "fraclap/quadrature.hpp"

namespace fraclap {

/// Dimension, fractional power alpha in (0,2) and splitting parameter gamma in (alpha, 2].
struct FracParams {
  int d = 2;
  double alpha = 1.0;
  double gamma = 2.0;

  void validate() const;
  /// floor(gamma/2): the origin-cell correction is only active for gamma = 2.
  int correction() const { return gamma >= 2.0 ? 1 : 0; }
  WeightExponent cell_exponent() const { return WeightExponent::for_cells(d, alpha, gamma); }
};

/// c_{d,alpha} = 2^{alpha-1} alpha Gamma((d+alpha)/2) / (pi^{d/2} Gamma(1-alpha/2)).
double norm_const(int d, double alpha);

/// Cell integrals of the weight on the unit mesh, W(i,j[,k]) over
/// [i,i+1] x [j,j+1] [x [k,k+1]] for indices 0..extent-1. Each unique cell
/// (up to index permutation) is integrated exactly once.
class CellTable {
 public:
  /// threads <= 0 selects std::thread::hardware_concurrency().
  static CellTable compute(int d, WeightExponent w, int extent, const QuadConfig& cfg = {},
                           int threads = 0);

  int dim() const { return d_; }
  int extent() const { return extent_; }
  WeightExponent exponent() const { return w_; }

  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * extent_ + j]; }
  double operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * extent_ + j) * extent_ + k];
  }

 private:
  int d_ = 2;
  int extent_ = 0;
  WeightExponent w_{};
  std::vector<double> data_;
};

/// Finite difference coefficients a_{m n} / a_{m n s} at mesh size h, indices
/// 0..N per axis, row-major with the first index slowest. Entries with an
/// index equal to N only enter a_{0..0}.
struct Stencil {
  FracParams params;
  int N = 0;
  double h = 0.0;
  double rel_tol = 0.0;
  double c_norm = 0.0;
  /// Integral of |xi|^-(d+alpha) over the exterior of (0, N h)^d.
  double tail = 0.0;
  std::vector<double> coeffs;

  std::size_t extent() const { return static_cast<std::size_t>(N) + 1; }
  double a(int m, int n) const { return coeffs[m * extent() + n]; }
  double a(int m, int n, int s) const { return coeffs[(m * extent() + n) * extent() + s]; }
  double& a(int m, int n) { return coeffs[m * extent() + n]; }
  double& a(int m, int n, int s) { return coeffs[(m * extent() + n) * extent() + s]; }

  /// Right-hand side of the a_{0..0} identity evaluated from the stored
  /// off-origin coefficients and tail; equals a(0,0[,0]) by construction.
  double origin_identity() const;
};

/// Assemble a stencil for N from a cell table with extent >= N. The table
/// only depends on (d, p), so one table serves every N up to its extent.
Stencil assemble_stencil(const FracParams& params, const CellTable& cells, int N, double h,
                         const QuadConfig& cfg = {});

Stencil build_stencil_2d(const FracParams& params, int N, double h, const QuadConfig& cfg = {},
                         int threads = 0);
Stencil build_stencil_3d(const FracParams& params, int N, double h, const QuadConfig& cfg = {},
                         int threads = 0);
/// Dispatches on params.d.
Stencil build_stencil(const FracParams& params, int N, double h, const QuadConfig& cfg = {},
                      int threads = 0);

/// Recompute a single off-origin coefficient from scratch (fresh quadrature of
/// its neighborhood cells). Used to verify cached stencils.
double recompute_coefficient(const Stencil& st, std::span<const int> index, const QuadConfig& cfg);

}  // namespace fraclap
