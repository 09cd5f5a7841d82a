#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fraclap/grid.hpp"
#include "fraclap/krylov.hpp"
#include "fraclap/stencil.hpp"
#include "fraclap/toeplitz.hpp"

namespace fraclap {

/// u(x) = (prod_i (1 - x_i^2))^s on (-1,1)^d, zero elsewhere.
struct ManufacturedFn {
  double s = 2.0;
  int d = 2;
  void validate() const;
};

double manufactured_eval(const ManufacturedFn& f, std::span<const double> x);
Field manufactured_field(const ManufacturedFn& f, const GridSpec& grid);

/// Cell count N with N h = L; throws DomainError unless L / h is an integer.
int mesh_count(double L, double h);

/// Checks that every h and ref_h split L exactly and that the reference mesh
/// refines each level at least 4x; throws DomainError / NonNestedGrids.
void validate_study_levels(std::span<const double> h_list, double ref_h, double L = 2.0);

struct StudyOptions {
  QuadConfig quad{};
  CgConfig cg{};
  int threads = 0;
};

struct StudyReport {
  std::string kind;
  FracParams params;
  double s = 0.0;
  double ref_h = 0.0;
  std::vector<double> h;
  std::vector<double> err_inf;
  std::vector<double> err_2;
  /// rate_*[i] compares level i-1 and i; rate_*[0] is NaN.
  std::vector<double> rate_inf;
  std::vector<double> rate_2;
  /// Distance from the node of maximum error to the domain boundary.
  std::vector<double> argmax_boundary_dist;
  /// CG iterations per level (solves only), reference solve last.
  std::vector<long> cg_iters;
  /// Coarse-level solutions (Poisson studies only).
  std::vector<Field> solutions;
  double seconds = 0.0;
};

/// log2(e[i-1] / e[i]) for successive halvings, NaN in slot 0.
std::vector<double> convergence_rates(std::span<const double> errors, std::span<const double> h);

/// Operator truncation error on (-1,1)^d: (A_ref u) at coarse nodes minus A_h u.
StudyReport truncation_study(const FracParams& params, double s, std::span<const double> h_list,
                             double ref_h, const StudyOptions& opt = {});

struct PoissonResult {
  Field u;
  long iters = 0;
  double resid = 0.0;
  bool converged = false;
};

/// Solve A u = f with homogeneous exterior data.
PoissonResult poisson_solve(const FractionalOperator& op, const Field& f, const CgConfig& cg = {});
PoissonResult poisson_solve(const FracParams& params, const GridSpec& grid, const Field& f,
                            const CgConfig& cg = {}, const QuadConfig& quad = {});

/// Manufactured Poisson problem on (-1,1)^d: f = A_ref u sampled at the
/// reference mesh and restricted to each coarse grid; error against u.
StudyReport poisson_manufactured_study(const FracParams& params, double s, std::span<const double> h_list,
                                       double ref_h, const StudyOptions& opt = {});

/// Poisson problem with f = 1 on (-1,1)^d; error against the reference-mesh solution.
StudyReport poisson_self_convergence(const FracParams& params, std::span<const double> h_list, double ref_h,
                                     const StudyOptions& opt = {});

/// Poisson problem with f = 1 on (-1,1)^d; the error at h is max |u_h - u_{h/2}|
/// over the nodes of the coarser mesh, so no reference solve is needed.
StudyReport poisson_successive_study(const FracParams& params, std::span<const double> h_list,
                                     const StudyOptions& opt = {});

/// h^d sum |u_i|.
double mass(const Field& u);

struct AllenCahnConfig {
  int d = 2;
  double alpha = 1.9;
  double gamma = 2.0;
  double delta = 0.03;
  double tau = 1e-3;
  double t_end = 0.1;
  std::array<std::array<double, 3>, 2> centers{{{0.4, 0.4, 0.5}, {0.6, 0.6, 0.5}}};
  double radius_offset = 0.12;
  double picard_tol = 1e-8;
  int picard_max = 50;
  /// Linear shift S moved into the implicit operator during Picard sweeps,
  /// (I + tau/2 (A + S)) x_{k+1} = rhs + tau/2 (F(x_k) + S x_k). The fixed
  /// point is unchanged. Negative selects 1 / (2 delta^alpha); 0 is plain Picard.
  double picard_shift = -1.0;
  int snapshot_every = 10;
  /// Inner solves stop at max(tol ||b||, reduction ||r0||); reduction 0 selects 1e-2.
  CgConfig cg{1e-12, 0, 0.0};

  void validate(const GridSpec& grid) const;
  FracParams params() const { return FracParams{d, alpha, gamma}; }
  long steps() const;
  double resolved_shift() const;
};

struct AllenCahnSnapshot {
  long step = 0;
  double t = 0.0;
  /// Phase field u (not the shifted variable).
  Field u;
  /// u >= 0 path joins the two centers.
  bool connected = false;
};

struct AllenCahnResult {
  std::vector<AllenCahnSnapshot> snapshots;
  /// (t, mass of u + 1) per step including t = 0.
  std::vector<std::array<double, 2>> mass_series;
  std::vector<int> picard_iters;
  std::vector<long> cg_iters;
  double max_abs_u = 0.0;
  double seconds = 0.0;
};

using SnapshotObserver = std::function<void(const AllenCahnSnapshot&)>;

/// Two-bubble initial phase field on the interior nodes.
Field allen_cahn_initial(const AllenCahnConfig& cfg, const GridSpec& grid);

/// True if the two center nodes are joined by a face-connected path of nodes with u >= level.
bool centers_connected(const Field& u, const AllenCahnConfig& cfg, double level = 0.0);

/// Crank-Nicolson in time with Picard iteration for the reaction term, on the
/// shifted variable u + 1 so the exterior datum is zero.
AllenCahnResult allen_cahn_run(const AllenCahnConfig& cfg, const GridSpec& grid, const FractionalOperator& op,
                               const SnapshotObserver& observer = {});
AllenCahnResult allen_cahn_run(const AllenCahnConfig& cfg, const GridSpec& grid,
                               const SnapshotObserver& observer = {}, const QuadConfig& quad = {});

}  // namespace fraclap
