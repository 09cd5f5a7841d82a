#include "fraclap/toeplitz.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>

#include "fraclap/error.hpp"

namespace fraclap {

namespace {

// FFTW's planner is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(double* p) const { fftw_free(p); }
};
using Buffer = std::unique_ptr<double[], FftwFree>;

Buffer allocate(std::size_t n) {
  auto* p = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  if (!p) throw std::bad_alloc();
  return Buffer(p);
}

}  // namespace

struct FractionalOperator::Transform {
  int rank = 2;
  std::array<int, 3> dims{};  // row-major order for FFTW: slowest axis first
  std::size_t real_len = 0;   // padded in-place real length
  std::size_t spec_len = 0;   // complex coefficients
  std::vector<double> symbol; // eigenvalues of the circulant, already divided by the transform size
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  std::mutex pool_mutex;
  std::vector<Buffer> pool;

  ~Transform() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }

  Buffer acquire() {
    {
      std::lock_guard lock(pool_mutex);
      if (!pool.empty()) {
        Buffer b = std::move(pool.back());
        pool.pop_back();
        return b;
      }
    }
    return allocate(real_len);
  }
  void release(Buffer b) {
    std::lock_guard lock(pool_mutex);
    pool.push_back(std::move(b));
  }
};

int fft_friendly_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

FractionalOperator::FractionalOperator(const Stencil& stencil, const GridSpec& grid)
    : grid_(grid), params_(stencil.params) {
  if (stencil.params.d != grid.d) throw ShapeMismatch("assemble_operator: stencil and grid dimension differ");
  if (stencil.N != grid.N || std::abs(stencil.h - grid.h) > 1e-12 * grid.h)
    throw ShapeMismatch("assemble_operator: stencil N/h do not match the grid");
  const int d = grid.d;
  for (int i = 0; i < d; ++i)
    if (grid.n[i] < 1 || grid.n[i] > stencil.N)
      throw ShapeMismatch("assemble_operator: interior count exceeds stencil extent");

  const int nx = grid.n[0], ny = grid.n[1], nz = d == 3 ? grid.n[2] : 1;
  first_col_.resize(static_cast<std::size_t>(nx) * ny * nz);
  const double c = stencil.c_norm;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        first_col_[i + static_cast<std::size_t>(nx) * (j + static_cast<std::size_t>(ny) * k)] =
            d == 2 ? -c * stencil.a(i, j) : -c * stencil.a(i, j, k);

  for (int i = 0; i < d; ++i) fft_shape_[i] = fft_friendly_size(2 * grid.n[i]);
  const int Px = fft_shape_[0], Py = fft_shape_[1], Pz = d == 3 ? fft_shape_[2] : 1;

  auto tr = std::make_unique<Transform>();
  tr->rank = d;
  if (d == 2) tr->dims = {Py, Px, 1};
  else tr->dims = {Pz, Py, Px};
  const std::size_t half = static_cast<std::size_t>(Px / 2 + 1);
  const std::size_t outer = static_cast<std::size_t>(Py) * Pz;
  tr->real_len = outer * 2 * half;
  tr->spec_len = outer * half;

  Buffer buf = allocate(tr->real_len);
  {
    std::lock_guard lock(planner_mutex());
    auto* cbuf = reinterpret_cast<fftw_complex*>(buf.get());
    tr->forward = fftw_plan_dft_r2c(d, tr->dims.data(), buf.get(), cbuf, FFTW_ESTIMATE);
    tr->backward = fftw_plan_dft_c2r(d, tr->dims.data(), cbuf, buf.get(), FFTW_ESTIMATE);
  }
  if (!tr->forward || !tr->backward) throw Error("assemble_operator: FFTW planning failed");

  // Even circulant extension: axis offset k maps to min(k, P - k) when that is < n.
  auto fold = [](int k, int P, int n) { return k < n ? k : (P - k < n ? P - k : -1); };
  const std::size_t row = 2 * half;
  std::memset(buf.get(), 0, sizeof(double) * tr->real_len);
  for (int k = 0; k < Pz; ++k) {
    const int dz = d == 3 ? fold(k, Pz, nz) : 0;
    if (dz < 0) continue;
    for (int j = 0; j < Py; ++j) {
      const int dy = fold(j, Py, ny);
      if (dy < 0) continue;
      double* line = buf.get() + (static_cast<std::size_t>(k) * Py + j) * row;
      for (int i = 0; i < Px; ++i) {
        const int dx = fold(i, Px, nx);
        if (dx >= 0) line[i] = entry(dx, dy, dz);
      }
    }
  }
  fftw_execute_dft_r2c(tr->forward, buf.get(), reinterpret_cast<fftw_complex*>(buf.get()));
  const double norm = 1.0 / (static_cast<double>(Px) * Py * Pz);
  tr->symbol.resize(tr->spec_len);
  for (std::size_t q = 0; q < tr->spec_len; ++q) tr->symbol[q] = buf[2 * q] * norm;
  tr->release(std::move(buf));
  fft_ = std::move(tr);
}

FractionalOperator::~FractionalOperator() = default;
FractionalOperator::FractionalOperator(FractionalOperator&&) noexcept = default;
FractionalOperator& FractionalOperator::operator=(FractionalOperator&&) noexcept = default;

void FractionalOperator::apply(std::span<const double> u, std::span<double> out) const {
  const std::size_t M = size();
  if (u.size() != M || out.size() != M) throw ShapeMismatch("apply: field length does not match operator");

  const int d = grid_.d;
  const int nx = grid_.n[0], ny = grid_.n[1], nz = d == 3 ? grid_.n[2] : 1;
  const int Px = fft_shape_[0], Py = fft_shape_[1];
  const std::size_t row = 2 * static_cast<std::size_t>(Px / 2 + 1);

  Buffer buf = fft_->acquire();
  std::memset(buf.get(), 0, sizeof(double) * fft_->real_len);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      std::memcpy(buf.get() + (static_cast<std::size_t>(k) * Py + j) * row, u.data() + grid_.index(0, j, k),
                  sizeof(double) * nx);

  auto* spec = reinterpret_cast<fftw_complex*>(buf.get());
  fftw_execute_dft_r2c(fft_->forward, buf.get(), spec);
  const double* sym = fft_->symbol.data();
  for (std::size_t q = 0; q < fft_->spec_len; ++q) {
    spec[q][0] *= sym[q];
    spec[q][1] *= sym[q];
  }
  fftw_execute_dft_c2r(fft_->backward, spec, buf.get());

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      std::memcpy(out.data() + grid_.index(0, j, k), buf.get() + (static_cast<std::size_t>(k) * Py + j) * row,
                  sizeof(double) * nx);
  fft_->release(std::move(buf));
}

void FractionalOperator::apply_dense(std::span<const double> u, std::span<double> out, std::size_t cap) const {
  const std::size_t M = size();
  if (M > cap) throw CapExceeded("apply_dense: " + std::to_string(M) + " unknowns exceed the cap");
  if (u.size() != M || out.size() != M) throw ShapeMismatch("apply_dense: field length does not match operator");
  const int nx = grid_.n[0], ny = grid_.n[1], nz = grid_.d == 3 ? grid_.n[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double acc = 0.0;
        for (int kk = 0; kk < nz; ++kk)
          for (int jj = 0; jj < ny; ++jj)
            for (int ii = 0; ii < nx; ++ii)
              acc += entry(std::abs(i - ii), std::abs(j - jj), std::abs(k - kk)) * u[grid_.index(ii, jj, kk)];
        out[grid_.index(i, j, k)] = acc;
      }
}

FractionalOperator assemble_operator(const Stencil& stencil, const GridSpec& grid) {
  return FractionalOperator(stencil, grid);
}

Field apply_fft(const FractionalOperator& op, const Field& u) {
  if (!u.grid.same_shape(op.grid())) throw ShapeMismatch("apply_fft: field grid differs from operator grid");
  Field out(op.grid());
  op.apply(u.values, out.values);
  return out;
}

Field apply_dense(const FractionalOperator& op, const Field& u, std::size_t cap) {
  if (!u.grid.same_shape(op.grid())) throw ShapeMismatch("apply_dense: field grid differs from operator grid");
  Field out(op.grid());
  op.apply_dense(u.values, out.values, cap);
  return out;
}

Eigen::MatrixXd dense_matrix(const FractionalOperator& op, std::size_t cap) {
  const std::size_t M = op.size();
  if (M > cap) throw CapExceeded("dense_matrix: " + std::to_string(M) + " unknowns exceed the cap");
  const auto& g = op.grid();
  const int nx = g.n[0], ny = g.n[1], nz = g.d == 3 ? g.n[2] : 1;
  Eigen::MatrixXd A(M, M);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (int kk = 0; kk < nz; ++kk)
          for (int jj = 0; jj < ny; ++jj)
            for (int ii = 0; ii < nx; ++ii)
              A(g.index(i, j, k), g.index(ii, jj, kk)) =
                  op.entry(std::abs(i - ii), std::abs(j - jj), std::abs(k - kk));
  return A;
}

double smallest_eigen_check(const FractionalOperator& op, std::size_t cap) {
  const Eigen::MatrixXd A = dense_matrix(op, cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("smallest_eigen_check: eigen solver failed");
  return es.eigenvalues().minCoeff();
}

bool cholesky_succeeds(const FractionalOperator& op, std::size_t cap) {
  const Eigen::MatrixXd A = dense_matrix(op, cap);
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  return llt.info() == Eigen::Success;
}

}  // namespace fraclap
