// Acceptance suite: one PASS/FAIL line per criterion.
//
//   fraclap_acceptance            run every criterion
//   fraclap_acceptance 3 9        run a subset
//   --report FILE                 also write the result lines to FILE
//
// Exit status is the number of failed criteria (0 when all pass).

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fraclap/pde.hpp"

using namespace fraclap;

namespace {

// Tolerances and reference values, pinned.
constexpr double kRate1Tol = 0.10;
constexpr double kRate2Tol = 0.15;
constexpr double kRate3Tol = 0.10;
constexpr double kRate4RoughTol = 0.15;
constexpr double kRate4SmoothTol = 0.10;
constexpr double kRate5Tol = 0.10;
constexpr double kRate6Tol = 0.10;
constexpr double kValueRelTol = 0.25;
constexpr double kLimitCoeffTol = 0.01;
constexpr double kLimitApplyTol = 0.02;
constexpr double kFftDenseTol = 1e-12;
constexpr int kFftCases = 50;
constexpr std::size_t kFftMaxNodes = 4096;
constexpr double kMassDecayFraction = 0.10;
constexpr double kMaxAbsU = 1.1;
constexpr int kPicardLoose = 25;
constexpr int kMonotoneFrom = 5;
constexpr double k3dBudgetSeconds = 15 * 60;
constexpr double kAllenCahnBudgetSeconds = 30 * 60;

constexpr double kTable1[3] = {5.704e-4, 4.250e-3, 1.350e-2};
constexpr double kTable2[2] = {3.017e-3, 8.871e-3};
constexpr double kTable4Alpha04 = 1.658e-4;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " !" << what;
    }
  }
};

std::vector<double> halvings(double h0, int count) {
  std::vector<double> h;
  for (int i = 0; i < count; ++i) h.push_back(h0 / std::pow(2.0, i));
  return h;
}

std::string fmt(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// All rates after the first level must lie in target +- tol.
bool rates_within(const std::vector<double>& rates, double target, double tol, std::ostringstream& log) {
  bool ok = true;
  log << " rates[";
  for (std::size_t i = 1; i < rates.size(); ++i) {
    log << (i > 1 ? " " : "") << fmt(rates[i], "%.3f");
    ok = ok && std::abs(rates[i] - target) <= tol;
  }
  log << "]";
  return ok;
}

bool within_rel(double v, double ref, double tol) { return std::abs(v - ref) <= tol * std::abs(ref); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Rough manufactured function, rate 1 - alpha.
void criterion1(Outcome& o) {
  const double alphas[3] = {0.1, 0.4, 0.7};
  for (int i = 0; i < 3; ++i) {
    const double a = alphas[i];
    const StudyReport r = truncation_study(FracParams{2, a, 2.0}, 1.0, halvings(1.0 / 16, 4), 1.0 / 1024);
    o.detail << " a=" << a;
    o.require(rates_within(r.rate_inf, 1.0 - a, kRate1Tol, o.detail), "rate");
    o.detail << " e16=" << fmt(r.err_inf[0]);
    o.require(within_rel(r.err_inf[0], kTable1[i], kValueRelTol), "value");
  }
}

// 2. s = 2, rate 2 - alpha.
void criterion2(Outcome& o) {
  const double alphas[2] = {1.0, 1.4};
  for (int i = 0; i < 2; ++i) {
    const double a = alphas[i];
    const StudyReport r = truncation_study(FracParams{2, a, 2.0}, 2.0, halvings(1.0 / 16, 4), 1.0 / 1024);
    o.detail << " a=" << a;
    o.require(rates_within(r.rate_inf, 2.0 - a, kRate2Tol, o.detail), "rate");
    o.detail << " e16=" << fmt(r.err_inf[0]);
    o.require(within_rel(r.err_inf[0], kTable2[i], kValueRelTol), "value");
  }
}

// 3. Smooth s = 2 + alpha + 0.1: second order in 2D and 3D.
void criterion3(Outcome& o) {
  for (double a : {0.5, 1.5}) {
    const StudyReport r = truncation_study(FracParams{2, a, 2.0}, 2.0 + a + 0.1, halvings(1.0 / 16, 4), 1.0 / 1024);
    o.detail << " 2d a=" << a;
    o.require(rates_within(r.rate_inf, 2.0, kRate3Tol, o.detail), "rate2d");
  }
  for (double a : {0.5, 1.5}) {
    const StudyReport r = truncation_study(FracParams{3, a, 2.0}, 2.0 + a + 0.1, halvings(1.0 / 8, 3), 1.0 / 128);
    o.detail << " 3d a=" << a;
    o.require(rates_within(r.rate_inf, 2.0, kRate3Tol, o.detail), "rate3d");
    o.detail << " t=" << fmt(r.seconds, "%.0f") << "s";
    o.require(r.seconds <= k3dBudgetSeconds, "time3d");
  }
}

// 4. Splitting parameter: gamma < 2 loses accuracy.
void criterion4(Outcome& o) {
  const double a = 1.5, s = 2.0 + a + 0.1;
  const StudyReport rough = truncation_study(FracParams{2, a, 1.6}, s, halvings(1.0 / 16, 3), 1.0 / 1024);
  o.detail << " g=1.6";
  o.require(rates_within(rough.rate_inf, 0.5, kRate4RoughTol, o.detail), "rate1.6");
  const StudyReport smooth = truncation_study(FracParams{2, a, 2.0}, s, halvings(1.0 / 16, 4), 1.0 / 1024);
  o.detail << " g=2";
  o.require(rates_within(smooth.rate_inf, 2.0, kRate4SmoothTol, o.detail), "rate2");
}

// 5. Manufactured Poisson problem with f prepared on the fine mesh.
void criterion5(Outcome& o) {
  for (double a : {0.4, 1.0, 1.4}) {
    const StudyReport r = poisson_manufactured_study(FracParams{2, a, 2.0}, 2.0, halvings(1.0 / 16, 4), 1.0 / 1024);
    o.detail << " a=" << a;
    o.require(rates_within(r.rate_inf, 2.0, kRate5Tol, o.detail), "rate");
    if (a == 0.4) {
      o.detail << " e16=" << fmt(r.err_inf[0]);
      o.require(within_rel(r.err_inf[0], kTable4Alpha04, kValueRelTol), "value");
    }
  }
}

// 6. f = 1: rate alpha / 2, largest error next to the boundary.
void criterion6(Outcome& o) {
  for (double a : {0.5, 1.0, 1.5}) {
    const StudyReport r = poisson_successive_study(FracParams{2, a, 2.0}, halvings(1.0 / 32, 3));
    o.detail << " a=" << a;
    o.require(rates_within(r.rate_inf, a / 2.0, kRate6Tol, o.detail), "rate");
    bool near = true;
    for (std::size_t i = 0; i < r.h.size(); ++i) near = near && r.argmax_boundary_dist[i] <= 2.0 * r.h[i] + 1e-12;
    o.require(near, "argmax");
  }
}

// 7. alpha -> 2: coefficients and action approach the classical Laplacian.
void criterion7(Outcome& o) {
  const double a = 1.999;
  for (int d : {2, 3}) {
    const int N = d == 2 ? 64 : 32;
    const GridSpec g = GridSpec::cube(d, -1.0, 1.0, N);
    const Stencil st = build_stencil(FracParams{d, a, 2.0}, N, g.h);
    const double ae1 = st.c_norm * (d == 2 ? st.a(1, 0) : st.a(1, 0, 0));
    const double coeff_err = std::abs(ae1 * g.h * g.h - 1.0);
    o.detail << " d=" << d << " ca_e1*h^2-1=" << fmt(coeff_err, "%.2e");
    o.require(coeff_err <= kLimitCoeffTol, "coeff");

    // smooth bump supported in the ball of radius 0.6
    auto bump = [](std::array<double, 3> x) {
      const double r2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.36;
      return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
    };
    const Field u = sample(g, [&](std::array<double, 3> x) {
      if (d == 2) x[2] = 0.0;
      return bump(x);
    });
    const FractionalOperator op(st, g);
    const Field Au = apply_fft(op, u);
    auto at = [&](int i, int j, int k) {
      if (i < 0 || j < 0 || i >= g.n[0] || j >= g.n[1]) return 0.0;
      if (d == 3 && (k < 0 || k >= g.n[2])) return 0.0;
      return u.values[g.index(i, j, d == 3 ? k : 0)];
    };
    double diff = 0.0, scale = 0.0;
    const int nz = d == 3 ? g.n[2] : 1;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < g.n[1]; ++j)
        for (int i = 0; i < g.n[0]; ++i) {
          double lap = 2.0 * d * at(i, j, k) - at(i - 1, j, k) - at(i + 1, j, k) - at(i, j - 1, k) - at(i, j + 1, k);
          if (d == 3) lap -= at(i, j, k - 1) + at(i, j, k + 1);
          lap /= g.h * g.h;
          diff = std::max(diff, std::abs(Au.values[g.index(i, j, k)] - lap));
          scale = std::max(scale, std::abs(lap));
        }
    o.detail << " apply_rel=" << fmt(diff / scale, "%.2e");
    o.require(diff <= kLimitApplyTol * scale, "apply");
  }
}

// 8. FFT product against the dense oracle; dense matrix symmetric positive definite.
void criterion8(Outcome& o) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  int asym = 0, not_spd = 0;
  std::size_t biggest = 0;
  for (int c = 0; c < kFftCases; ++c) {
    const int d = c % 4 == 3 ? 3 : 2;
    const double alpha = 0.02 + 1.96 * U(rng);
    const double gamma = c % 3 == 0 ? alpha + (2.0 - alpha) * U(rng) : 2.0;
    // rectangular box with integer cell counts, M <= kFftMaxNodes
    const int cap_axis = d == 2 ? 64 : 16;
    std::array<int, 3> cells{};
    std::size_t M = 0;
    do {
      M = 1;
      for (int a = 0; a < d; ++a) {
        cells[a] = 2 + static_cast<int>(U(rng) * (cap_axis - 1));
        M *= static_cast<std::size_t>(cells[a] - 1);
      }
    } while (M > kFftMaxNodes);
    const double h = 0.05 + U(rng);
    std::vector<double> lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      lo[a] = -1.0 + U(rng);
      hi[a] = lo[a] + cells[a] * h;
    }
    const int N = *std::max_element(cells.begin(), cells.begin() + d);
    const GridSpec g = GridSpec::box(lo, hi, N);
    const FractionalOperator op(build_stencil(FracParams{d, alpha, gamma}, N, g.h), g);
    biggest = std::max(biggest, op.size());

    std::normal_distribution<double> N01;
    std::vector<double> u(op.size()), f(op.size()), r(op.size());
    for (auto& x : u) x = N01(rng);
    op.apply(u, f);
    op.apply_dense(u, r, kFftMaxNodes);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      num = std::max(num, std::abs(f[i] - r[i]));
      den = std::max(den, std::abs(r[i]));
    }
    worst = std::max(worst, num / den);

    const Eigen::MatrixXd A = dense_matrix(op, kFftMaxNodes);
    if (!(A - A.transpose()).isZero(0.0)) ++asym;
    if (A.llt().info() != Eigen::Success) ++not_spd;
  }
  o.detail << " cases=" << kFftCases << " maxM=" << biggest << " worst_rel=" << fmt(worst, "%.2e")
           << " asym=" << asym << " not_spd=" << not_spd;
  o.require(worst <= kFftDenseTol, "fft");
  o.require(asym == 0, "symmetric");
  o.require(not_spd == 0, "spd");
}

// 9. Two kissing bubbles: merge for alpha = 1.9, stay apart for alpha = 0.7.
void criterion9(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec g = GridSpec::cube(2, 0.0, 1.0, 256);
  for (double a : {1.9, 0.7}) {
    AllenCahnConfig c;
    c.alpha = a;
    c.tau = 1e-3;
    c.delta = 0.03;
    c.t_end = a > 1.0 ? 0.03 : 0.1;
    c.snapshot_every = 1;
    bool merged = false;
    long merge_step = -1;
    const AllenCahnResult r = allen_cahn_run(c, g, [&](const AllenCahnSnapshot& s) {
      if (s.connected && !merged) {
        merged = true;
        merge_step = s.step;
      }
    });
    const auto& m = r.mass_series;
    bool monotone = true;
    for (std::size_t n = kMonotoneFrom; n + 1 < m.size(); ++n) monotone = monotone && m[n + 1][1] < m[n][1];
    const double ratio = m.back()[1] / m.front()[1];
    const int picard = *std::max_element(r.picard_iters.begin(), r.picard_iters.end());
    o.detail << " a=" << a << " merge@" << merge_step << " mass_end/0=" << fmt(ratio, "%.3g")
             << " max|u|=" << fmt(r.max_abs_u, "%.4f") << " picard<=" << picard;
    if (a > 1.0) {
      o.require(merged, "merge");
      o.require(ratio < kMassDecayFraction, "decay");
    } else {
      o.require(!merged, "no-merge");
    }
    o.require(monotone, "monotone");
    o.require(r.max_abs_u <= kMaxAbsU, "bounded");
    o.require(picard <= kPicardLoose, "picard");
  }
  const double secs = seconds_since(t0);
  o.detail << " t=" << fmt(secs, "%.0f") << "s";
  o.require(secs <= kAllenCahnBudgetSeconds, "time");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "truncation rough 2D, rate 1-alpha", criterion1},
      {2, "truncation s=2, rate 2-alpha", criterion2},
      {3, "truncation smooth 2D/3D, rate 2", criterion3},
      {4, "gamma sensitivity", criterion4},
      {5, "Poisson manufactured, rate 2", criterion5},
      {6, "Poisson f=1, rate alpha/2", criterion6},
      {7, "classical limit alpha=1.999", criterion7},
      {8, "FFT vs dense oracle, SPD", criterion8},
      {9, "Allen-Cahn kissing bubbles", criterion9},
  };
  std::set<int> pick;
  std::FILE* report = nullptr;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--report" && i + 1 < argc) {
      report = std::fopen(argv[++i], "w");
      if (!report) {
        std::fprintf(stderr, "cannot open report file %s\n", argv[i]);
        return 1;
      }
    } else {
      pick.insert(std::atoi(argv[i]));
    }
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    char head[160];
    std::snprintf(head, sizeof head, "[%s] criterion %d: %s (%.1fs)", o.pass ? "PASS" : "FAIL", c.id, c.name,
                  seconds_since(t0));
    std::printf("%s%s\n", head, o.detail.str().c_str());
    std::fflush(stdout);
    if (report) {
      std::fprintf(report, "%s%s\n", head, o.detail.str().c_str());
      std::fflush(report);
    }
    if (!o.pass) ++failed;
  }
  if (report) std::fclose(report);
  return failed;
}
