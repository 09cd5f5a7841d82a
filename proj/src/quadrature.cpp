#include "fraclap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

#include "fraclap/error.hpp"

namespace fraclap {

void QuadConfig::validate() const {
  if (!(rel_tol > 0.0)) throw DomainError("QuadConfig: rel_tol must be > 0");
  if (!(abs_tol >= 0.0)) throw DomainError("QuadConfig: abs_tol must be >= 0");
  if (max_subdivisions <= 0) throw DomainError("QuadConfig: max_subdivisions must be > 0");
}

namespace quad {
namespace {

struct GaussTable {
  // rules[n] holds n nodes/weights; index 0 unused.
  std::array<std::vector<double>, kMaxOrder + 1> nodes;
  std::array<std::vector<double>, kMaxOrder + 1> weights;

  GaussTable() {
    for (int n = 1; n <= kMaxOrder; ++n) {
      auto& x = nodes[n];
      auto& w = weights[n];
      x.resize(n);
      w.resize(n);
      for (int i = 0; i < (n + 1) / 2; ++i) {
        // Newton on P_n starting from the Chebyshev-like guess.
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
          double p0 = 1.0, p1 = 0.0;
          for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
          }
          dp = n * (z * p0 - p1) / (z * z - 1.0);
          const double dz = p0 / dp;
          z -= dz;
          if (std::abs(dz) < 1e-16) break;
        }
        const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
      }
      if (n % 2 == 1) x[n / 2] = 0.0;
    }
  }
};

const GaussTable& table() {
  static const GaussTable t;
  return t;
}

}  // namespace

GaussRule gauss_legendre(int n) {
  if (n < 1 || n > kMaxOrder) throw DomainError("gauss_legendre: order out of range");
  const auto& t = table();
  return {t.nodes[n], t.weights[n]};
}

}  // namespace quad

namespace {

template <int D, class F>
double tensor_gauss(const F& f, const Box<D>& b, int n) {
  const auto rule = quad::gauss_legendre(n);
  std::array<double, D> c{}, r{};
  for (int i = 0; i < D; ++i) {
    c[i] = 0.5 * (b.lo[i] + b.hi[i]);
    r[i] = 0.5 * (b.hi[i] - b.lo[i]);
  }
  double jac = 1.0;
  for (int i = 0; i < D; ++i) jac *= r[i];

  double sum = 0.0;
  std::array<double, D> x{};
  if constexpr (D == 1) {
    for (int i = 0; i < n; ++i) {
      x[0] = c[0] + r[0] * rule.nodes[i];
      sum += rule.weights[i] * f(x);
    }
  } else if constexpr (D == 2) {
    for (int j = 0; j < n; ++j) {
      x[1] = c[1] + r[1] * rule.nodes[j];
      double row = 0.0;
      for (int i = 0; i < n; ++i) {
        x[0] = c[0] + r[0] * rule.nodes[i];
        row += rule.weights[i] * f(x);
      }
      sum += rule.weights[j] * row;
    }
  } else {
    static_assert(D == 3);
    for (int k = 0; k < n; ++k) {
      x[2] = c[2] + r[2] * rule.nodes[k];
      double plane = 0.0;
      for (int j = 0; j < n; ++j) {
        x[1] = c[1] + r[1] * rule.nodes[j];
        double row = 0.0;
        for (int i = 0; i < n; ++i) {
          x[0] = c[0] + r[0] * rule.nodes[i];
          row += rule.weights[i] * f(x);
        }
        plane += rule.weights[j] * row;
      }
      sum += rule.weights[k] * plane;
    }
  }
  return sum * jac;
}

template <int D>
struct Piece {
  Box<D> box;
  double value;
  double err;
  bool operator<(const Piece& o) const { return err < o.err; }
};

// Globally adaptive tensor Gauss: each piece is estimated by the pair
// (G_n, G_{n+1}) and the piece with the largest |G_{n+1} - G_n| is bisected
// along every axis until the summed estimate meets the tolerance.
template <int D, class F, class OrderFn>
double adaptive_integrate(const F& f, const Box<D>& box, const QuadConfig& cfg,
                          const OrderFn& order_for) {
  auto eval = [&](const Box<D>& b) {
    const int n = order_for(b);
    const double qa = tensor_gauss<D>(f, b, n);
    const double qb = tensor_gauss<D>(f, b, n + 1);
    return Piece<D>{b, qb, std::abs(qb - qa)};
  };

  Piece<D> first = eval(box);
  if (first.err <= std::max(cfg.rel_tol * std::abs(first.value), cfg.abs_tol)) return first.value;

  std::priority_queue<Piece<D>> heap;
  heap.push(first);
  double total = first.value;
  double total_err = first.err;
  std::int64_t splits = 0;

  while (total_err > std::max(cfg.rel_tol * std::abs(total), cfg.abs_tol)) {
    if (++splits > cfg.max_subdivisions)
      throw BudgetExceeded("adaptive quadrature: subdivision budget exhausted");
    Piece<D> worst = heap.top();
    heap.pop();
    total -= worst.value;
    total_err -= worst.err;

    std::array<double, D> mid{};
    for (int i = 0; i < D; ++i) mid[i] = 0.5 * (worst.box.lo[i] + worst.box.hi[i]);
    for (int corner = 0; corner < (1 << D); ++corner) {
      Box<D> child;
      for (int i = 0; i < D; ++i) {
        const bool upper = (corner >> i) & 1;
        child.lo[i] = upper ? mid[i] : worst.box.lo[i];
        child.hi[i] = upper ? worst.box.hi[i] : mid[i];
      }
      Piece<D> p = eval(child);
      total += p.value;
      total_err += p.err;
      heap.push(p);
    }

    // Running sums drift; resum from the heap now and then.
    if (splits % 4096 == 0) {
      auto copy = heap;
      total = 0.0;
      total_err = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_err += copy.top().err;
        copy.pop();
      }
    }
  }
  return total;
}

// Order for |x|^-p on a box away from the origin, from the Bernstein-ellipse
// parameter of the nearest singularity.
template <int D>
int power_order(const Box<D>& b, double rel_tol) {
  double rmin2 = 0.0, diag2 = 0.0;
  for (int i = 0; i < D; ++i) {
    const double c = std::max(b.lo[i], 0.0);
    rmin2 += c * c;
    const double w = b.hi[i] - b.lo[i];
    diag2 += w * w;
  }
  const double rho = std::sqrt(rmin2 / (0.25 * diag2));
  if (rho <= 1.05) return 8;
  const double beta = rho + std::sqrt(rho * rho - 1.0);
  const double digits = -std::log10(rel_tol);
  const int n = static_cast<int>(std::ceil(digits / (2.0 * std::log10(beta))));
  return std::clamp(n, 2, 12);
}

template <int D>
void check_box(const Box<D>& b) {
  for (int i = 0; i < D; ++i)
    if (!(b.lo[i] >= 0.0) || !(b.lo[i] < b.hi[i]))
      throw DomainError("cell must satisfy 0 <= lo < hi on every axis");
}

void check_exponent(double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("weight exponent p must be finite and >= 0");
}

template <int D>
double power_integrand(const std::array<double, D>& x, double half_p) {
  double r2 = 0.0;
  for (int i = 0; i < D; ++i) r2 += x[i] * x[i];
  return std::pow(r2, -half_p);
}

void check_alpha(double alpha, double L) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("alpha must lie in (0, 2)");
  if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("L must be > 0");
}

constexpr int kSmoothOrder = 8;

// The pair estimate undershoots on x^alpha endpoint behavior, where G_n and
// G_{n+1} share the same leading error; those integrals run 1000x tighter.
QuadConfig endpoint_singular(QuadConfig cfg) {
  cfg.rel_tol *= 1e-3;
  cfg.abs_tol *= 1e-3;
  return cfg;
}

}  // namespace

double cell_weight_2d(WeightExponent w, const Box2& cell, const QuadConfig& cfg) {
  cfg.validate();
  check_box(cell);
  check_exponent(w.p);
  const double half_p = 0.5 * w.p;

  if (!cell.at_origin()) {
    auto f = [half_p](const std::array<double, 2>& x) { return power_integrand<2>(x, half_p); };
    return adaptive_integrate<2>(f, cell, cfg,
                                 [&](const Box2& b) { return power_order<2>(b, cfg.rel_tol); });
  }

  if (w.p >= 2.0) throw NonIntegrable("cell_weight_2d: origin cell needs p < 2");
  // Polar reduction: the radial integral of r^{1-p} is exact, leaving
  // (1/(2-p)) * int r_max(theta)^{2-p} dtheta with r_max = a sec or b csc.
  const double q = 2.0 - w.p;
  const double a = cell.hi[0], b = cell.hi[1];
  auto order = [](const Box<1>&) { return kSmoothOrder; };
  if (a == b) {
    auto f = [q](const std::array<double, 1>& t) { return std::pow(1.0 / std::cos(t[0]), q); };
    const double ang = adaptive_integrate<1>(f, Box<1>{{0.0}, {std::numbers::pi / 4}}, cfg, order);
    return 2.0 * std::pow(a, q) * ang / q;
  }
  const double split = std::atan2(b, a);
  auto f1 = [q, a](const std::array<double, 1>& t) { return std::pow(a / std::cos(t[0]), q); };
  auto f2 = [q, b](const std::array<double, 1>& t) { return std::pow(b / std::sin(t[0]), q); };
  const double lower = adaptive_integrate<1>(f1, Box<1>{{0.0}, {split}}, cfg, order);
  const double upper = adaptive_integrate<1>(f2, Box<1>{{split}, {std::numbers::pi / 2}}, cfg, order);
  return (lower + upper) / q;
}

double cell_weight_3d(WeightExponent w, const Box3& cell, const QuadConfig& cfg) {
  cfg.validate();
  check_box(cell);
  check_exponent(w.p);
  const double half_p = 0.5 * w.p;

  if (!cell.at_origin()) {
    auto f = [half_p](const std::array<double, 3>& x) { return power_integrand<3>(x, half_p); };
    return adaptive_integrate<3>(f, cell, cfg,
                                 [&](const Box3& b) { return power_order<3>(b, cfg.rel_tol); });
  }

  if (w.p >= 3.0) throw NonIntegrable("cell_weight_3d: origin cell needs p < 3");
  // Pyramid split: the pyramid with apex 0 and base on the face x_k = e_k is
  // {t*q : q on the face}, dV = e_k t^2 dt dA, so the t-integral of t^{2-p} is
  // 1/(3-p) and the remaining face integral has a smooth integrand.
  const std::array<double, 3> e = cell.hi;
  auto order = [](const Box2&) { return kSmoothOrder; };
  auto pyramid = [&](int k) {
    const int u = (k + 1) % 3, v = (k + 2) % 3;
    const double ek2 = e[k] * e[k];
    auto f = [ek2, half_p](const std::array<double, 2>& y) {
      return std::pow(ek2 + y[0] * y[0] + y[1] * y[1], -half_p);
    };
    const double face = adaptive_integrate<2>(f, Box2{{0.0, 0.0}, {e[u], e[v]}}, cfg, order);
    return e[k] * face / (3.0 - w.p);
  };
  // a cube splits into three congruent pyramids
  if (e[0] == e[1] && e[1] == e[2]) return 3.0 * pyramid(0);
  double total = 0.0;
  for (int k = 0; k < 3; ++k) total += pyramid(k);
  return total;
}

namespace quad {

double tail_strip_2d(double alpha, double L) {
  // int_{xi>=L} int_{eta>=0}: eta = xi t separates the integral.
  const double beta = 0.5 * std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (1.0 + alpha)) /
                      std::tgamma(0.5 * (2.0 + alpha));
  return beta * std::pow(L, -alpha) / alpha;
}

double tail_corner_2d(double alpha, double L, const QuadConfig& cfg) {
  // Polar about the origin on the half theta in [pi/4, pi/2): r >= L / cos(theta).
  auto f = [alpha](const std::array<double, 1>& t) { return std::pow(std::sin(t[0]), alpha); };
  const double ang = adaptive_integrate<1>(f, Box<1>{{0.0}, {std::numbers::pi / 4}},
                                           endpoint_singular(cfg),
                                           [](const Box<1>&) { return kSmoothOrder; });
  return 2.0 * std::pow(L, -alpha) * ang / alpha;
}

double tail_strip_3d(double alpha, double L) {
  // quarter plane in (eta, zeta) integrates radially to (pi/2) xi^{-(1+alpha)}/(1+alpha)
  return std::numbers::pi / (2.0 * alpha * (1.0 + alpha)) * std::pow(L, -alpha);
}

double tail_edge_3d(double alpha, double L, const QuadConfig& cfg) {
  // zeta in [0, inf) integrates to R^{-(2+alpha)} times a beta-function constant,
  // leaving the 2D corner integral with the same alpha.
  const double beta = 0.5 * std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (2.0 + alpha)) /
                      std::tgamma(0.5 * (3.0 + alpha));
  return beta * tail_corner_2d(alpha, L, cfg);
}

double tail_corner_3d(double alpha, double L, const QuadConfig& cfg) {
  // Points of [1,inf)^3 whose smallest coordinate is x are x (1, v, w) with
  // v, w >= 1; the x integral gives 1/alpha. The w integral is
  //   (1+v^2)^{1/2-q} G(1/sqrt(1+v^2)),  G(x) = int_x^inf (1+t^2)^{-q} dt,
  // and v = cot(psi) turns the outer integral into sin^alpha(psi) G(sin psi).
  const double q = 0.5 * (3.0 + alpha);
  const double full = 0.5 * std::sqrt(std::numbers::pi) * std::tgamma(q - 0.5) / std::tgamma(q);
  const QuadConfig inner_cfg = cfg;
  auto g = [&](double x) {
    auto h = [q](const std::array<double, 1>& t) { return std::pow(1.0 + t[0] * t[0], -q); };
    return full - adaptive_integrate<1>(h, Box<1>{{0.0}, {x}}, inner_cfg,
                                        [](const Box<1>&) { return kSmoothOrder; });
  };
  auto f = [&](const std::array<double, 1>& p) {
    const double sp = std::sin(p[0]);
    return std::pow(sp, alpha) * g(sp);
  };
  const double s = adaptive_integrate<1>(f, Box<1>{{0.0}, {std::numbers::pi / 4}},
                                         endpoint_singular(cfg),
                                         [](const Box<1>&) { return kSmoothOrder; });
  return 3.0 * std::pow(L, -alpha) * s / alpha;
}

}  // namespace quad

double tail_weight_2d(double alpha, double L, const QuadConfig& cfg) {
  cfg.validate();
  check_alpha(alpha, L);
  return 2.0 * quad::tail_strip_2d(alpha, L) - quad::tail_corner_2d(alpha, L, cfg);
}

double tail_weight_3d(double alpha, double L, const QuadConfig& cfg) {
  cfg.validate();
  check_alpha(alpha, L);
  return 3.0 * quad::tail_strip_3d(alpha, L) - 3.0 * quad::tail_edge_3d(alpha, L, cfg) +
         quad::tail_corner_3d(alpha, L, cfg);
}

}  // namespace fraclap
