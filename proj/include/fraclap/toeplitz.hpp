#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>

#include <Eigen/Dense>

#include "fraclap/grid.hpp"
#include "fraclap/stencil.hpp"

namespace fraclap {

/// Symmetric multilevel Toeplitz matrix of the discretized fractional
/// Laplacian on a grid with homogeneous exterior data.
///
/// Stored as its first hyperplane t[dx][dy][dz] = -c_{d,alpha} a_{dx dy dz}
/// for 0 <= d_i < n_i; entry (p, q) of the matrix is t[|p - q|] componentwise.
/// Products use a circulant embedding of size >= 2 n_i per axis (rounded up to
/// 2,3,5,7-smooth lengths) whose eigenvalues are cached at assembly.
///
/// Immutable after construction; apply() is reentrant (scratch buffers come
/// from an internal pool), so one operator can serve concurrent solves.
class FractionalOperator {
 public:
  FractionalOperator(const Stencil& stencil, const GridSpec& grid);
  ~FractionalOperator();
  FractionalOperator(FractionalOperator&&) noexcept;
  FractionalOperator& operator=(FractionalOperator&&) noexcept;
  FractionalOperator(const FractionalOperator&) = delete;
  FractionalOperator& operator=(const FractionalOperator&) = delete;

  const GridSpec& grid() const { return grid_; }
  const FracParams& params() const { return params_; }
  std::size_t size() const { return grid_.size(); }

  /// Matrix entry for an absolute index offset.
  double entry(int dx, int dy, int dz = 0) const {
    return first_col_[static_cast<std::size_t>(dx) +
                      static_cast<std::size_t>(grid_.n[0]) * (dy + static_cast<std::size_t>(grid_.n[1]) * dz)];
  }
  double diagonal() const { return first_col_[0]; }
  std::span<const double> first_col() const { return first_col_; }
  /// Padded transform lengths per axis (x, y, z).
  std::array<int, 3> fft_shape() const { return fft_shape_; }

  /// out = A u via FFT. out may not alias u.
  void apply(std::span<const double> u, std::span<double> out) const;
  /// out = A u by direct summation; throws CapExceeded when size() > cap.
  void apply_dense(std::span<const double> u, std::span<double> out, std::size_t cap = 10000) const;

 private:
  struct Transform;

  GridSpec grid_;
  FracParams params_;
  std::vector<double> first_col_;
  std::array<int, 3> fft_shape_{1, 1, 1};
  std::unique_ptr<Transform> fft_;
};

FractionalOperator assemble_operator(const Stencil& stencil, const GridSpec& grid);

Field apply_fft(const FractionalOperator& op, const Field& u);
Field apply_dense(const FractionalOperator& op, const Field& u, std::size_t cap = 10000);

/// Dense matrix of the operator (size() <= cap).
Eigen::MatrixXd dense_matrix(const FractionalOperator& op, std::size_t cap = 10000);

/// Smallest eigenvalue of the dense matrix; positive for an SPD operator.
double smallest_eigen_check(const FractionalOperator& op, std::size_t cap = 10000);

/// True if a Cholesky factorization of the dense matrix succeeds.
bool cholesky_succeeds(const FractionalOperator& op, std::size_t cap = 10000);

/// Next length >= n whose prime factors are all in {2, 3, 5, 7}.
int fft_friendly_size(int n);

}  // namespace fraclap
