#include "fraclap/grid.hpp"

#include <algorithm>
#include <cmath>

#include "fraclap/error.hpp"

namespace fraclap {

GridSpec GridSpec::box(std::span<const double> lo, std::span<const double> hi, int N) {
  if (lo.size() != hi.size() || (lo.size() != 2 && lo.size() != 3))
    throw DomainError("GridSpec: bounds must have 2 or 3 entries");
  if (N < 2) throw DomainError("GridSpec: N must be >= 2");
  GridSpec g;
  g.d = static_cast<int>(lo.size());
  double L = 0.0;
  for (int i = 0; i < g.d; ++i) {
    if (!(hi[i] > lo[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw DomainError("GridSpec: every axis needs lo < hi");
    g.lo[i] = lo[i];
    g.hi[i] = hi[i];
    L = std::max(L, hi[i] - lo[i]);
  }
  g.L = L;
  g.N = N;
  g.h = L / N;
  for (int i = 0; i < g.d; ++i) {
    // smallest N_i with lo + N_i h >= hi, forgiving rounding in the ratio
    const double ratio = (hi[i] - lo[i]) / g.h;
    int Ni = static_cast<int>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
    Ni = std::max(Ni, 2);
    g.n[i] = Ni - 1;
  }
  return g;
}

GridSpec GridSpec::cube(int d, double a, double b, int N) {
  const std::array<double, 3> lo{a, a, a}, hi{b, b, b};
  return box(std::span<const double>(lo.data(), d), std::span<const double>(hi.data(), d), N);
}

bool GridSpec::same_shape(const GridSpec& o) const {
  if (d != o.d || N != o.N) return false;
  for (int i = 0; i < d; ++i) {
    if (n[i] != o.n[i]) return false;
    if (std::abs(lo[i] - o.lo[i]) > 1e-12 * std::max(1.0, std::abs(lo[i]))) return false;
  }
  return std::abs(h - o.h) <= 1e-12 * h;
}

Field::Field(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size()) throw ShapeMismatch("Field: value count does not match grid");
  for (double x : values)
    if (!std::isfinite(x)) throw DomainError("Field: values must be finite");
}

}  // namespace fraclap
