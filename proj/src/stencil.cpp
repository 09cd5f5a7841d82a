#include "fraclap/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "fraclap/error.hpp"

namespace fraclap {

void FracParams::validate() const {
  if (d != 2 && d != 3) throw DomainError("FracParams: d must be 2 or 3");
  if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("FracParams: alpha must lie in (0, 2)");
  if (!(gamma > alpha && gamma <= 2.0)) throw DomainError("FracParams: gamma must lie in (alpha, 2]");
}

double norm_const(int d, double alpha) {
  if (d != 2 && d != 3) throw DomainError("norm_const: d must be 2 or 3");
  if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("norm_const: alpha must lie in (0, 2)");
  return std::pow(2.0, alpha - 1.0) * alpha * std::tgamma(0.5 * (d + alpha)) /
         (std::pow(std::numbers::pi, 0.5 * d) * std::tgamma(1.0 - 0.5 * alpha));
}

namespace {

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(t) for t in [0, threads) and rethrows the first failure.
template <class Body>
void run_parallel(int threads, const Body& body) {
  if (threads == 1) {
    body(0);
    return;
  }
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        body(t);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

CellTable CellTable::compute(int d, WeightExponent w, int extent, const QuadConfig& cfg,
                             int threads) {
  if (d != 2 && d != 3) throw DomainError("CellTable: d must be 2 or 3");
  if (extent < 1) throw DomainError("CellTable: extent must be >= 1");
  cfg.validate();

  CellTable t;
  t.d_ = d;
  t.extent_ = extent;
  t.w_ = w;
  const std::size_t n = static_cast<std::size_t>(extent);
  t.data_.assign(d == 2 ? n * n : n * n * n, 0.0);
  const int nthreads = std::min(resolve_threads(threads), extent);

  if (d == 2) {
    run_parallel(nthreads, [&](int tid) {
      for (int j = tid; j < extent; j += nthreads) {
        for (int i = 0; i <= j; ++i) {
          const Box2 cell{{double(i), double(j)}, {i + 1.0, j + 1.0}};
          const double v = cell_weight_2d(w, cell, cfg);
          t.data_[i * n + j] = v;
          t.data_[j * n + i] = v;
        }
      }
    });
  } else {
    run_parallel(nthreads, [&](int tid) {
      for (int k = tid; k < extent; k += nthreads) {
        for (int j = 0; j <= k; ++j) {
          for (int i = 0; i <= j; ++i) {
            const Box3 cell{{double(i), double(j), double(k)}, {i + 1.0, j + 1.0, k + 1.0}};
            const double v = cell_weight_3d(w, cell, cfg);
            const int idx[3] = {i, j, k};
            // all permutations of (i, j, k)
            static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                                {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
            for (const auto& p : perms)
              t.data_[(idx[p[0]] * n + idx[p[1]]) * n + idx[p[2]]] = v;
          }
        }
      }
    });
  }
  return t;
}

double Stencil::origin_identity() const {
  long double axis = 0.0L, plane = 0.0L, bulk = 0.0L;
  if (params.d == 2) {
    for (int m = 1; m <= N; ++m) axis += static_cast<long double>(a(m, 0)) + a(0, m);
    for (int m = 1; m <= N; ++m)
      for (int n = 1; n <= N; ++n) plane += a(m, n);
    return static_cast<double>(-2.0L * axis - 4.0L * plane - 4.0L * tail);
  }
  for (int m = 1; m <= N; ++m)
    axis += static_cast<long double>(a(m, 0, 0)) + a(0, m, 0) + a(0, 0, m);
  for (int m = 1; m <= N; ++m)
    for (int n = 1; n <= N; ++n)
      plane += static_cast<long double>(a(0, m, n)) + a(m, 0, n) + a(m, n, 0);
  for (int m = 1; m <= N; ++m)
    for (int n = 1; n <= N; ++n) {
      long double line = 0.0L;
      for (int s = 1; s <= N; ++s) line += a(m, n, s);
      bulk += line;
    }
  return static_cast<double>(-2.0L * axis - 4.0L * plane - 8.0L * bulk - 8.0L * tail);
}

namespace {

// Origin-cell correction weight cbar for an off-origin index (0/1 entries only).
double correction_weight_2d(int m, int n) {
  if (m > 1 || n > 1) return 0.0;
  return (m + n == 1) ? 1.0 : -1.0;
}

double correction_weight_3d(int m, int n, int s) {
  if (m > 1 || n > 1 || s > 1) return 0.0;
  const int zeros = (m == 0) + (n == 0) + (s == 0);
  return zeros == 2 ? -5.0 / 3.0 : 1.0;
}

double unit_coefficient_2d(const FracParams& prm, int m, int n, double neighborhood, double origin) {
  const int zeros = (m == 0) + (n == 0);
  const double r2 = double(m) * m + double(n) * n;
  const double pre = std::ldexp(1.0, zeros) / (4.0 * std::pow(r2, 0.5 * prm.gamma));
  return pre * (neighborhood + correction_weight_2d(m, n) * prm.correction() * origin);
}

double unit_coefficient_3d(const FracParams& prm, int m, int n, int s, double neighborhood,
                           double origin) {
  const int zeros = (m == 0) + (n == 0) + (s == 0);
  const double r2 = double(m) * m + double(n) * n + double(s) * s;
  const double pre = std::ldexp(1.0, zeros) / (8.0 * std::pow(r2, 0.5 * prm.gamma));
  return pre * (neighborhood - correction_weight_3d(m, n, s) * prm.correction() * origin);
}

void check_mesh(int N, double h) {
  if (N < 2) throw DomainError("stencil: N must be >= 2");
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("stencil: h must be > 0");
}

}  // namespace

Stencil assemble_stencil(const FracParams& params, const CellTable& cells, int N, double h,
                         const QuadConfig& cfg) {
  params.validate();
  check_mesh(N, h);
  if (cells.dim() != params.d) throw ShapeMismatch("assemble_stencil: cell table dimension differs");
  if (cells.extent() < N) throw ShapeMismatch("assemble_stencil: cell table smaller than N");
  if (cells.exponent().p != params.cell_exponent().p)
    throw ShapeMismatch("assemble_stencil: cell table built for a different weight exponent");

  Stencil st;
  st.params = params;
  st.N = N;
  st.h = h;
  st.rel_tol = cfg.rel_tol;
  st.c_norm = norm_const(params.d, params.alpha);
  // Every coefficient and the tail scale as h^{-alpha} relative to the unit mesh.
  const double scale = std::pow(h, -params.alpha);
  const std::size_t e = static_cast<std::size_t>(N) + 1;

  if (params.d == 2) {
    st.coeffs.assign(e * e, 0.0);
    auto W = [&](int i, int j) { return (i < 0 || j < 0 || i >= N || j >= N) ? 0.0 : cells(i, j); };
    const double origin = cells(0, 0);
    for (int n = 0; n <= N; ++n) {
      for (int m = 0; m <= n; ++m) {
        if (m + n == 0) continue;
        const double T = W(m - 1, n - 1) + W(m - 1, n) + W(m, n - 1) + W(m, n);
        const double v = scale * unit_coefficient_2d(params, m, n, T, origin);
        st.a(m, n) = v;
        st.a(n, m) = v;
      }
    }
    st.tail = scale * tail_weight_2d(params.alpha, double(N), cfg);
    st.a(0, 0) = st.origin_identity();
  } else {
    st.coeffs.assign(e * e * e, 0.0);
    auto W = [&](int i, int j, int k) {
      return (i < 0 || j < 0 || k < 0 || i >= N || j >= N || k >= N) ? 0.0 : cells(i, j, k);
    };
    const double origin = cells(0, 0, 0);
    for (int s = 0; s <= N; ++s) {
      for (int n = 0; n <= s; ++n) {
        for (int m = 0; m <= n; ++m) {
          if (m + n + s == 0) continue;
          double T = 0.0;
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
              for (int dk = 0; dk < 2; ++dk) T += W(m - di, n - dj, s - dk);
          const double v = scale * unit_coefficient_3d(params, m, n, s, T, origin);
          st.a(m, n, s) = v;
          st.a(m, s, n) = v;
          st.a(n, m, s) = v;
          st.a(n, s, m) = v;
          st.a(s, m, n) = v;
          st.a(s, n, m) = v;
        }
      }
    }
    st.tail = scale * tail_weight_3d(params.alpha, double(N), cfg);
    st.a(0, 0, 0) = st.origin_identity();
  }
  return st;
}

Stencil build_stencil_2d(const FracParams& params, int N, double h, const QuadConfig& cfg,
                         int threads) {
  params.validate();
  if (params.d != 2) throw DomainError("build_stencil_2d: params.d must be 2");
  check_mesh(N, h);
  const CellTable cells = CellTable::compute(2, params.cell_exponent(), N, cfg, threads);
  return assemble_stencil(params, cells, N, h, cfg);
}

Stencil build_stencil_3d(const FracParams& params, int N, double h, const QuadConfig& cfg,
                         int threads) {
  params.validate();
  if (params.d != 3) throw DomainError("build_stencil_3d: params.d must be 3");
  check_mesh(N, h);
  const CellTable cells = CellTable::compute(3, params.cell_exponent(), N, cfg, threads);
  return assemble_stencil(params, cells, N, h, cfg);
}

Stencil build_stencil(const FracParams& params, int N, double h, const QuadConfig& cfg,
                      int threads) {
  return params.d == 2 ? build_stencil_2d(params, N, h, cfg, threads)
                       : build_stencil_3d(params, N, h, cfg, threads);
}

double recompute_coefficient(const Stencil& st, std::span<const int> index, const QuadConfig& cfg) {
  const auto& prm = st.params;
  if (static_cast<int>(index.size()) != prm.d) throw ShapeMismatch("recompute_coefficient: index rank");
  int sum = 0;
  for (int v : index) {
    if (v < 0 || v > st.N) throw ShapeMismatch("recompute_coefficient: index out of range");
    sum += v;
  }
  if (sum == 0) throw DomainError("recompute_coefficient: origin coefficient depends on the whole table");

  const WeightExponent w = prm.cell_exponent();
  const double scale = std::pow(st.h, -prm.alpha);
  if (prm.d == 2) {
    const int m = index[0], n = index[1];
    double T = 0.0;
    for (int i = m - 1; i <= m; ++i)
      for (int j = n - 1; j <= n; ++j)
        if (i >= 0 && j >= 0 && i < st.N && j < st.N)
          T += cell_weight_2d(w, Box2{{double(i), double(j)}, {i + 1.0, j + 1.0}}, cfg);
    const double origin = cell_weight_2d(w, Box2{{0.0, 0.0}, {1.0, 1.0}}, cfg);
    return scale * unit_coefficient_2d(prm, m, n, T, origin);
  }
  const int m = index[0], n = index[1], s = index[2];
  double T = 0.0;
  for (int i = m - 1; i <= m; ++i)
    for (int j = n - 1; j <= n; ++j)
      for (int k = s - 1; k <= s; ++k)
        if (i >= 0 && j >= 0 && k >= 0 && i < st.N && j < st.N && k < st.N)
          T += cell_weight_3d(w, Box3{{double(i), double(j), double(k)}, {i + 1.0, j + 1.0, k + 1.0}}, cfg);
  const double origin = cell_weight_3d(w, Box3{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}, cfg);
  return scale * unit_coefficient_3d(prm, m, n, s, T, origin);
}

}  // namespace fraclap
