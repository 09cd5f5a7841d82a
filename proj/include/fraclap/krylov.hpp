#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "fraclap/grid.hpp"
#include "fraclap/toeplitz.hpp"

namespace fraclap {

/// Symmetric linear map on flat vectors of a fixed length.
struct LinearMap {
  std::size_t size = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;

  /// u -> sigma u + mu A u. The operator must outlive the map.
  static LinearMap shifted(double sigma, double mu, const FractionalOperator& op);
  /// Dense symmetric matrix (tests and small systems).
  static LinearMap dense(const Eigen::MatrixXd& A);
};

struct CgConfig {
  double tol = 1e-10;
  /// <= 0 selects 10 sqrt(M) + 100.
  long max_iter = 0;
  /// Also accept ||r|| <= reduction ||r0|| (inexact inner solves); 0 disables.
  double reduction = 0.0;

  void validate() const;
  long resolved_max_iter(std::size_t M) const;
};

struct CgResult {
  std::vector<double> x;
  long iters = 0;
  /// ||b - A x||_2 / ||b||_2 recomputed from the returned iterate.
  double resid = 0.0;
  bool converged = false;
};

/// Unpreconditioned conjugate gradients. Stops when the recursive residual
/// meets max(tol ||b||, reduction ||r0||) and the true residual confirms it. A non-converged run returns
/// the best iterate with converged = false. Throws BreakdownNonSPD when a
/// search direction has non-positive curvature.
CgResult cg_solve(const LinearMap& map, std::span<const double> b, std::span<const double> x0,
                  const CgConfig& cfg = {});

CgResult cg_solve(const LinearMap& map, const Field& b, const Field& x0, const CgConfig& cfg = {});

}  // namespace fraclap
