#include "fraclap/pde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

#include "fraclap/error.hpp"

namespace fraclap {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_levels(std::span<const double> h_list, double ref_h, double L, int& Nref, std::vector<int>& Ns) {
  if (h_list.empty()) throw DomainError("study: empty mesh list");
  Nref = mesh_count(L, ref_h);
  Ns.clear();
  for (double h : h_list) {
    const int N = mesh_count(L, h);
    if (Nref % N != 0) throw NonNestedGrids("study: reference mesh does not refine h = " + std::to_string(h));
    if (Nref < 4 * N) throw NonNestedGrids("study: reference mesh must be at least 4x finer than every level");
    Ns.push_back(N);
  }
}

// Distance from interior node to the nearest face of the box.
double boundary_distance(const GridSpec& g, std::size_t flat) {
  const std::size_t nx = g.n[0], ny = g.n[1];
  const int idx[3] = {int(flat % nx), int((flat / nx) % ny), int(flat / (nx * ny))};
  double dist = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.d; ++a) {
    const double x = g.coord(a, idx[a]);
    dist = std::min({dist, x - g.lo[a], g.hi[a] - x});
  }
  return dist;
}

struct LevelError {
  double inf = 0.0;
  double l2 = 0.0;
  double argmax_dist = 0.0;
};

// Compare a coarse-grid vector with a reference-grid vector at shared nodes.
LevelError compare_nested(const GridSpec& coarse, std::span<const double> uc, const GridSpec& fine,
                          std::span<const double> uf) {
  const int k = fine.N / coarse.N;
  const int nz = coarse.d == 3 ? coarse.n[2] : 1;
  LevelError e;
  long double sq = 0.0L;
  std::size_t arg = 0;
  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j < coarse.n[1]; ++j)
      for (int i = 0; i < coarse.n[0]; ++i) {
        const std::size_t c = coarse.index(i, j, kk);
        const std::size_t f =
            fine.index((i + 1) * k - 1, (j + 1) * k - 1, coarse.d == 3 ? (kk + 1) * k - 1 : 0);
        const double diff = std::abs(uc[c] - uf[f]);
        sq += static_cast<long double>(diff) * diff;
        if (diff > e.inf) {
          e.inf = diff;
          arg = c;
        }
      }
  e.l2 = std::sqrt(std::pow(coarse.h, coarse.d) * static_cast<double>(sq));
  e.argmax_dist = boundary_distance(coarse, arg);
  return e;
}

std::vector<double> restrict_nested(const GridSpec& coarse, const GridSpec& fine, std::span<const double> uf) {
  const int k = fine.N / coarse.N;
  const int nz = coarse.d == 3 ? coarse.n[2] : 1;
  std::vector<double> out(coarse.size());
  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j < coarse.n[1]; ++j)
      for (int i = 0; i < coarse.n[0]; ++i)
        out[coarse.index(i, j, kk)] =
            uf[fine.index((i + 1) * k - 1, (j + 1) * k - 1, coarse.d == 3 ? (kk + 1) * k - 1 : 0)];
  return out;
}

// Multilinear interpolation of a coarse field (zero outside) onto a nested finer grid.
std::vector<double> prolong_nested(const GridSpec& coarse, std::span<const double> uc, const GridSpec& fine) {
  const int k = fine.N / coarse.N;
  const int d = coarse.d;
  auto at = [&](int i, int j, int kk) -> double {
    if (i < 0 || j < 0 || i >= coarse.n[0] || j >= coarse.n[1]) return 0.0;
    if (d == 3 && (kk < 0 || kk >= coarse.n[2])) return 0.0;
    return uc[coarse.index(i, j, d == 3 ? kk : 0)];
  };
  const int nz = d == 3 ? fine.n[2] : 1;
  std::vector<double> out(fine.size());
  for (int kk = 0; kk < nz; ++kk)
    for (int j = 0; j < fine.n[1]; ++j)
      for (int i = 0; i < fine.n[0]; ++i) {
        // fine node p = i + 1 sits at coarse position (i + 1) / k, coarse interior index shifted by one
        const int p[3] = {i + 1, j + 1, kk + 1};
        int c0[3];
        double w[3];
        for (int a = 0; a < 3; ++a) {
          c0[a] = p[a] / k - 1;
          w[a] = double(p[a] % k) / k;
        }
        double v = 0.0;
        for (int dz = 0; dz < (d == 3 ? 2 : 1); ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              double wt = (dx ? w[0] : 1 - w[0]) * (dy ? w[1] : 1 - w[1]);
              if (d == 3) wt *= dz ? w[2] : 1 - w[2];
              if (wt != 0.0) v += wt * at(c0[0] + dx, c0[1] + dy, c0[2] + dz);
            }
        out[fine.index(i, j, d == 3 ? kk : 0)] = v;
      }
  return out;
}

void fill_rates(StudyReport& r) {
  r.rate_inf = convergence_rates(r.err_inf, r.h);
  r.rate_2 = convergence_rates(r.err_2, r.h);
}

}  // namespace

void ManufacturedFn::validate() const {
  if (d != 2 && d != 3) throw DomainError("ManufacturedFn: d must be 2 or 3");
  if (!(s >= 1.0) || !std::isfinite(s)) throw DomainError("ManufacturedFn: s must be >= 1");
}

double manufactured_eval(const ManufacturedFn& f, std::span<const double> x) {
  if (static_cast<int>(x.size()) < f.d) throw ShapeMismatch("manufactured_eval: point has too few coordinates");
  double prod = 1.0;
  for (int i = 0; i < f.d; ++i) {
    if (!(std::abs(x[i]) < 1.0)) return 0.0;
    prod *= 1.0 - x[i] * x[i];
  }
  return std::pow(prod, f.s);
}

Field manufactured_field(const ManufacturedFn& f, const GridSpec& grid) {
  f.validate();
  if (grid.d != f.d) throw ShapeMismatch("manufactured_field: dimension mismatch");
  return sample(grid, [&](const std::array<double, 3>& x) { return manufactured_eval(f, x); });
}

int mesh_count(double L, double h) {
  if (!(h > 0.0) || !(L > 0.0) || !std::isfinite(h)) throw DomainError("mesh size must be positive");
  const double r = L / h;
  const double N = std::round(r);
  if (std::abs(r - N) > 1e-9 * r || N < 2 || N > 1 << 20)
    throw DomainError("mesh size h must divide the domain length into at least 2 cells");
  return static_cast<int>(N);
}

std::vector<double> convergence_rates(std::span<const double> errors, std::span<const double> h) {
  if (errors.size() != h.size()) throw ShapeMismatch("convergence_rates: length mismatch");
  std::vector<double> r(errors.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i < errors.size(); ++i)
    r[i] = std::log(errors[i - 1] / errors[i]) / std::log(h[i - 1] / h[i]);
  return r;
}

StudyReport truncation_study(const FracParams& params, double s, std::span<const double> h_list, double ref_h,
                             const StudyOptions& opt) {
  const auto t0 = Clock::now();
  params.validate();
  const ManufacturedFn fn{s, params.d};
  fn.validate();
  int Nref = 0;
  std::vector<int> Ns;
  check_levels(h_list, ref_h, 2.0, Nref, Ns);

  const CellTable cells = CellTable::compute(params.d, params.cell_exponent(), Nref, opt.quad, opt.threads);
  const GridSpec gref = GridSpec::cube(params.d, -1.0, 1.0, Nref);
  std::vector<double> fref;
  {
    const FractionalOperator op(assemble_stencil(params, cells, Nref, 2.0 / Nref, opt.quad), gref);
    fref = apply_fft(op, manufactured_field(fn, gref)).values;
  }

  StudyReport r;
  r.kind = "truncation";
  r.params = params;
  r.s = s;
  r.ref_h = ref_h;
  for (std::size_t l = 0; l < Ns.size(); ++l) {
    const int N = Ns[l];
    const GridSpec g = GridSpec::cube(params.d, -1.0, 1.0, N);
    const FractionalOperator op(assemble_stencil(params, cells, N, 2.0 / N, opt.quad), g);
    const Field Au = apply_fft(op, manufactured_field(fn, g));
    const LevelError e = compare_nested(g, Au.values, gref, fref);
    r.h.push_back(h_list[l]);
    r.err_inf.push_back(e.inf);
    r.err_2.push_back(e.l2);
    r.argmax_boundary_dist.push_back(e.argmax_dist);
  }
  fill_rates(r);
  r.seconds = seconds_since(t0);
  return r;
}

PoissonResult poisson_solve(const FractionalOperator& op, const Field& f, const CgConfig& cg) {
  if (!f.grid.same_shape(op.grid())) throw ShapeMismatch("poisson_solve: rhs grid differs from operator grid");
  const Field x0(op.grid());
  CgResult res = cg_solve(LinearMap::shifted(0.0, 1.0, op), f, x0, cg);
  return PoissonResult{Field(op.grid(), std::move(res.x)), res.iters, res.resid, res.converged};
}

PoissonResult poisson_solve(const FracParams& params, const GridSpec& grid, const Field& f, const CgConfig& cg,
                            const QuadConfig& quad) {
  params.validate();
  const FractionalOperator op(build_stencil(params, grid.N, grid.h, quad), grid);
  return poisson_solve(op, f, cg);
}

StudyReport poisson_manufactured_study(const FracParams& params, double s, std::span<const double> h_list,
                                       double ref_h, const StudyOptions& opt) {
  const auto t0 = Clock::now();
  params.validate();
  const ManufacturedFn fn{s, params.d};
  fn.validate();
  int Nref = 0;
  std::vector<int> Ns;
  check_levels(h_list, ref_h, 2.0, Nref, Ns);

  const CellTable cells = CellTable::compute(params.d, params.cell_exponent(), Nref, opt.quad, opt.threads);
  const GridSpec gref = GridSpec::cube(params.d, -1.0, 1.0, Nref);
  std::vector<double> fref;
  {
    const FractionalOperator op(assemble_stencil(params, cells, Nref, 2.0 / Nref, opt.quad), gref);
    fref = apply_fft(op, manufactured_field(fn, gref)).values;
  }

  StudyReport r;
  r.kind = "poisson-manufactured";
  r.params = params;
  r.s = s;
  r.ref_h = ref_h;
  for (std::size_t l = 0; l < Ns.size(); ++l) {
    const int N = Ns[l];
    const GridSpec g = GridSpec::cube(params.d, -1.0, 1.0, N);
    const FractionalOperator op(assemble_stencil(params, cells, N, 2.0 / N, opt.quad), g);
    const Field f(g, restrict_nested(g, gref, fref));
    const PoissonResult sol = poisson_solve(op, f, opt.cg);
    if (!sol.converged) throw Error("poisson: CG did not converge at h = " + std::to_string(h_list[l]));
    const Field exact = manufactured_field(fn, g);
    double einf = 0.0, sq = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double e = std::abs(sol.u.values[i] - exact.values[i]);
      sq += e * e;
      if (e > einf) {
        einf = e;
        arg = i;
      }
    }
    r.h.push_back(h_list[l]);
    r.err_inf.push_back(einf);
    r.err_2.push_back(std::sqrt(std::pow(g.h, g.d) * sq));
    r.argmax_boundary_dist.push_back(boundary_distance(g, arg));
    r.cg_iters.push_back(sol.iters);
    r.solutions.push_back(sol.u);
  }
  fill_rates(r);
  r.seconds = seconds_since(t0);
  return r;
}

StudyReport poisson_self_convergence(const FracParams& params, std::span<const double> h_list, double ref_h,
                                     const StudyOptions& opt) {
  const auto t0 = Clock::now();
  params.validate();
  int Nref = 0;
  std::vector<int> Ns;
  check_levels(h_list, ref_h, 2.0, Nref, Ns);

  const CellTable cells = CellTable::compute(params.d, params.cell_exponent(), Nref, opt.quad, opt.threads);

  StudyReport r;
  r.kind = "poisson-self-convergence";
  r.params = params;
  r.ref_h = ref_h;

  std::vector<Field> sols;
  int finest = 0;
  for (std::size_t l = 0; l < Ns.size(); ++l) {
    const int N = Ns[l];
    const GridSpec g = GridSpec::cube(params.d, -1.0, 1.0, N);
    const FractionalOperator op(assemble_stencil(params, cells, N, 2.0 / N, opt.quad), g);
    PoissonResult sol = poisson_solve(op, Field(g, 1.0), opt.cg);
    if (!sol.converged) throw Error("poisson: CG did not converge at h = " + std::to_string(h_list[l]));
    r.cg_iters.push_back(sol.iters);
    if (N > Ns[finest]) finest = static_cast<int>(l);
    sols.push_back(std::move(sol.u));
  }

  const GridSpec gref = GridSpec::cube(params.d, -1.0, 1.0, Nref);
  std::vector<double> uref;
  {
    const FractionalOperator op(assemble_stencil(params, cells, Nref, 2.0 / Nref, opt.quad), gref);
    // warm start from the finest level
    const std::vector<double> x0 = prolong_nested(sols[finest].grid, sols[finest].values, gref);
    CgResult res = cg_solve(LinearMap::shifted(0.0, 1.0, op), Field(gref, 1.0).values, x0, opt.cg);
    if (!res.converged) throw Error("poisson: CG did not converge on the reference mesh");
    r.cg_iters.push_back(res.iters);
    uref = std::move(res.x);
  }

  for (std::size_t l = 0; l < Ns.size(); ++l) {
    const LevelError e = compare_nested(sols[l].grid, sols[l].values, gref, uref);
    r.h.push_back(h_list[l]);
    r.err_inf.push_back(e.inf);
    r.err_2.push_back(e.l2);
    r.argmax_boundary_dist.push_back(e.argmax_dist);
  }
  r.solutions = std::move(sols);
  fill_rates(r);
  r.seconds = seconds_since(t0);
  return r;
}

StudyReport poisson_successive_study(const FracParams& params, std::span<const double> h_list,
                                     const StudyOptions& opt) {
  const auto t0 = Clock::now();
  params.validate();
  if (h_list.empty()) throw DomainError("study: empty mesh list");
  std::vector<int> Ns;
  int Nmax = 0;
  for (double h : h_list) {
    Ns.push_back(mesh_count(2.0, h));
    Nmax = std::max(Nmax, 2 * Ns.back());
  }
  for (int N : Ns)
    if (Nmax % N != 0) throw NonNestedGrids("study: levels are not nested");

  const CellTable cells = CellTable::compute(params.d, params.cell_exponent(), Nmax, opt.quad, opt.threads);
  std::map<int, Field> sols;
  std::map<int, long> iters;
  auto solve = [&](int N) -> const Field& {
    auto it = sols.find(N);
    if (it != sols.end()) return it->second;
    const GridSpec g = GridSpec::cube(params.d, -1.0, 1.0, N);
    const FractionalOperator op(assemble_stencil(params, cells, N, 2.0 / N, opt.quad), g);
    PoissonResult sol = poisson_solve(op, Field(g, 1.0), opt.cg);
    if (!sol.converged) throw Error("poisson: CG did not converge at N = " + std::to_string(N));
    iters[N] = sol.iters;
    return sols.emplace(N, std::move(sol.u)).first->second;
  };

  StudyReport r;
  r.kind = "poisson-successive";
  r.params = params;
  r.ref_h = 2.0 / Nmax;
  for (std::size_t l = 0; l < Ns.size(); ++l) {
    const Field& uc = solve(Ns[l]);
    const Field& uf = solve(2 * Ns[l]);
    const LevelError e = compare_nested(uc.grid, uc.values, uf.grid, uf.values);
    r.h.push_back(h_list[l]);
    r.err_inf.push_back(e.inf);
    r.err_2.push_back(e.l2);
    r.argmax_boundary_dist.push_back(e.argmax_dist);
    r.solutions.push_back(uc);
    r.cg_iters.push_back(iters[Ns[l]]);
  }
  r.cg_iters.push_back(iters[Nmax]);
  fill_rates(r);
  r.seconds = seconds_since(t0);
  return r;
}

void validate_study_levels(std::span<const double> h_list, double ref_h, double L) {
  int Nref = 0;
  std::vector<int> Ns;
  check_levels(h_list, ref_h, L, Nref, Ns);
}

double mass(const Field& u) {
  long double s = 0.0L;
  for (double v : u.values) s += std::abs(v);
  return std::pow(u.grid.h, u.grid.d) * static_cast<double>(s);
}

void AllenCahnConfig::validate(const GridSpec& grid) const {
  params().validate();
  if (grid.d != d) throw ShapeMismatch("AllenCahnConfig: grid dimension differs from d");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("AllenCahnConfig: delta must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("AllenCahnConfig: tau must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("AllenCahnConfig: t_end must be >= 0");
  if (!std::isfinite(picard_shift)) throw DomainError("AllenCahnConfig: picard_shift must be finite");
  if (!(picard_tol > 0.0)) throw DomainError("AllenCahnConfig: picard_tol must be positive");
  if (picard_max < 1) throw DomainError("AllenCahnConfig: picard_max must be >= 1");
  if (snapshot_every < 1) throw DomainError("AllenCahnConfig: snapshot_every must be >= 1");
  if (!(radius_offset > 0.0)) throw DomainError("AllenCahnConfig: radius_offset must be positive");
  for (const auto& c : centers)
    for (int a = 0; a < d; ++a)
      if (!(c[a] > grid.lo[a] && c[a] < grid.hi[a])) throw DomainError("AllenCahnConfig: center outside the domain");
  cg.validate();
}

double AllenCahnConfig::resolved_shift() const {
  return picard_shift < 0.0 ? 0.5 / std::pow(delta, alpha) : picard_shift;
}

long AllenCahnConfig::steps() const {
  const double r = t_end / tau;
  return static_cast<long>(std::ceil(r - 1e-9 * std::max(1.0, r)));
}

Field allen_cahn_initial(const AllenCahnConfig& cfg, const GridSpec& grid) {
  return sample(grid, [&](const std::array<double, 3>& x) {
    double u = 1.0;
    for (const auto& c : cfg.centers) {
      double r2 = 0.0;
      for (int a = 0; a < cfg.d; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
      u -= std::tanh((std::sqrt(r2) - cfg.radius_offset) / cfg.delta);
    }
    return u;
  });
}

bool centers_connected(const Field& u, const AllenCahnConfig& cfg, double level) {
  const GridSpec& g = u.grid;
  auto node = [&](const std::array<double, 3>& c) {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < g.d; ++a)
      idx[a] = std::clamp(static_cast<int>(std::lround((c[a] - g.lo[a]) / g.h)) - 1, 0, g.n[a] - 1);
    return idx;
  };
  const auto s = node(cfg.centers[0]), t = node(cfg.centers[1]);
  const std::size_t src = g.index(s[0], s[1], s[2]), dst = g.index(t[0], t[1], t[2]);
  if (!(u.values[src] >= level) || !(u.values[dst] >= level)) return false;

  const int nz = g.d == 3 ? g.n[2] : 1;
  std::vector<char> seen(g.size(), 0);
  std::deque<std::array<int, 3>> queue{s};
  seen[src] = 1;
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    if (g.index(p[0], p[1], p[2]) == dst) return true;
    for (int a = 0; a < g.d; ++a)
      for (int step : {-1, 1}) {
        auto q = p;
        q[a] += step;
        if (q[a] < 0 || q[a] >= (a == 2 ? nz : g.n[a])) continue;
        const std::size_t qi = g.index(q[0], q[1], q[2]);
        if (seen[qi] || !(u.values[qi] >= level)) continue;
        seen[qi] = 1;
        queue.push_back(q);
      }
  }
  return false;
}

AllenCahnResult allen_cahn_run(const AllenCahnConfig& cfg, const GridSpec& grid, const FractionalOperator& op,
                               const SnapshotObserver& observer) {
  const auto t0 = Clock::now();
  cfg.validate(grid);
  if (!op.grid().same_shape(grid)) throw ShapeMismatch("allen_cahn_run: operator grid differs");
  if (op.params().alpha != cfg.alpha || op.params().gamma != cfg.gamma)
    throw ShapeMismatch("allen_cahn_run: operator built for different alpha/gamma");

  const std::size_t M = grid.size();
  const double half = 0.5 * cfg.tau;
  const double k = 1.0 / std::pow(cfg.delta, cfg.alpha);
  auto F = [k](double ub) {
    const double v = ub - 1.0;
    return -k * v * (v * v - 1.0);
  };

  AllenCahnResult res;
  Field ub = allen_cahn_initial(cfg, grid);
  for (double& v : ub.values) v += 1.0;

  auto snapshot = [&](long step, double t) {
    AllenCahnSnapshot snap{step, t, Field(grid), false};
    for (std::size_t i = 0; i < M; ++i) snap.u.values[i] = ub.values[i] - 1.0;
    snap.connected = centers_connected(snap.u, cfg, 0.0);
    if (observer) observer(snap);
    res.snapshots.push_back(std::move(snap));
  };
  auto track_max = [&] {
    for (double v : ub.values) res.max_abs_u = std::max(res.max_abs_u, std::abs(v - 1.0));
  };

  track_max();
  res.mass_series.push_back({0.0, mass(ub)});
  snapshot(0, 0.0);

  const double S = cfg.resolved_shift();
  const LinearMap lhs = LinearMap::shifted(1.0 + half * S, half, op);
  CgConfig inner = cfg.cg;
  if (inner.reduction == 0.0) inner.reduction = 1e-2;
  const long nsteps = cfg.steps();
  std::vector<double> base(M), Au(M), b(M);
  for (long n = 1; n <= nsteps; ++n) {
    const double t = n * cfg.tau;
    op.apply(ub.values, Au);
    for (std::size_t i = 0; i < M; ++i) base[i] = ub.values[i] - half * Au[i] + half * F(ub.values[i]);

    std::vector<double> x = ub.values;
    double inc = std::numeric_limits<double>::infinity();
    int it = 0;
    long cg_total = 0;
    while (it < cfg.picard_max) {
      for (std::size_t i = 0; i < M; ++i) b[i] = base[i] + half * (F(x[i]) + S * x[i]);
      CgResult sol = cg_solve(lhs, b, x, inner);
      if (!sol.converged)
        throw Error("allen_cahn_run: CG did not converge at step " + std::to_string(n) +
                    " (relative residual " + std::to_string(sol.resid) + ")");
      cg_total += sol.iters;
      inc = 0.0;
      for (std::size_t i = 0; i < M; ++i) inc = std::max(inc, std::abs(sol.x[i] - x[i]));
      x = std::move(sol.x);
      ++it;
      if (inc < cfg.picard_tol) break;
    }
    if (!(inc < cfg.picard_tol)) {
      std::ostringstream msg;
      msg << "allen_cahn_run: Picard iteration stalled at step " << n << " (t = " << t << "), increment " << inc
          << " after " << it << " iterations";
      throw PicardNotConverged(msg.str());
    }
    ub.values = std::move(x);
    res.picard_iters.push_back(it);
    res.cg_iters.push_back(cg_total);
    track_max();
    res.mass_series.push_back({t, mass(ub)});
    if (n % cfg.snapshot_every == 0 || n == nsteps) snapshot(n, t);
  }
  res.seconds = seconds_since(t0);
  return res;
}

AllenCahnResult allen_cahn_run(const AllenCahnConfig& cfg, const GridSpec& grid, const SnapshotObserver& observer,
                               const QuadConfig& quad) {
  cfg.validate(grid);
  const FractionalOperator op(build_stencil(cfg.params(), grid.N, grid.h, quad), grid);
  return allen_cahn_run(cfg, grid, op, observer);
}

}  // namespace fraclap
