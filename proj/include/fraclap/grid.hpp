#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fraclap {

/// Uniform mesh on an axis-aligned box. The longest side L carries N cells,
/// h = L / N, and every other axis takes the smallest N_i with a_i + N_i h >= b_i.
/// Unknowns are the interior nodes, n_i = N_i - 1 per axis.
struct GridSpec {
  int d = 2;
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  double h = 0.0;
  double L = 0.0;
  int N = 0;
  std::array<int, 3> n{1, 1, 1};

  static GridSpec box(std::span<const double> lo, std::span<const double> hi, int N);
  /// (a, b)^d
  static GridSpec cube(int d, double a, double b, int N);

  std::size_t size() const {
    std::size_t m = 1;
    for (int i = 0; i < d; ++i) m *= static_cast<std::size_t>(n[i]);
    return m;
  }
  /// Coordinate of interior node i (0-based) along an axis.
  double coord(int axis, int i) const { return lo[axis] + (i + 1) * h; }
  /// Flat index, x fastest.
  std::size_t index(int i, int j, int k = 0) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n[0]) * (j + static_cast<std::size_t>(n[1]) * k);
  }

  bool same_shape(const GridSpec& o) const;
};

/// Interior-node values ordered x fastest, then y, then z.
struct Field {
  GridSpec grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const GridSpec& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  Field(const GridSpec& g, std::vector<double> v);

  std::span<const double> span() const { return values; }
  std::span<double> span() { return values; }
  std::size_t size() const { return values.size(); }
};

/// Sample f at every interior node.
template <class F>
Field sample(const GridSpec& g, F&& f) {
  Field out(g);
  const int nz = g.d == 3 ? g.n[2] : 1;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < g.n[1]; ++j)
      for (int i = 0; i < g.n[0]; ++i) {
        std::array<double, 3> x{g.coord(0, i), g.coord(1, j), g.d == 3 ? g.coord(2, k) : 0.0};
        out.values[g.index(i, j, k)] = f(x);
      }
  return out;
}

}  // namespace fraclap
