#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/io.hpp"
#include "fraclap/pde.hpp"

#ifndef FRACLAP_VERSION
#define FRACLAP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fraclap;

namespace {

constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCorrupt = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_fraction(const std::string& text) {
  auto number = [&](const std::string& part) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      throw UsageError("malformed mesh size '" + text + "'");
    }
    if (used != part.size() || !std::isfinite(v)) throw UsageError("malformed mesh size '" + text + "'");
    return v;
  };
  const auto slash = text.find('/');
  double v = 0.0;
  if (slash == std::string::npos) {
    v = number(text);
  } else {
    const double den = number(text.substr(slash + 1));
    if (den == 0.0) throw UsageError("malformed mesh size '" + text + "'");
    v = number(text.substr(0, slash)) / den;
  }
  if (!(v > 0.0)) throw UsageError("mesh size must be positive: '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

std::string fmt17(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Flag values override the --config document, which overrides defaults.
// Every looked-up key is recorded so the manifest holds the resolved run.
class Settings {
 public:
  std::map<std::string, std::string> storage;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
  json file = json::object();
  json resolved = json::object();

  void bind(CLI::App* app, const std::string& key, const std::string& help) {
    options[key] = app->add_option("--" + key, storage[key], help);
  }

  void load_config() {
    if (config_path.empty()) return;
    std::ifstream is(config_path);
    if (!is) throw UsageError("cannot read config file " + config_path);
    try {
      json doc = json::parse(is);
      if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
      if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
      file = doc;
    } catch (const json::exception& e) {
      throw UsageError("config file " + config_path + " is not valid JSON: " + e.what());
    }
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (auto it = options.find(key); it != options.end() && it->second->count() > 0) return storage.at(key);
    if (!file.contains(key)) return std::nullopt;
    const json& v = file.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return fmt17(v.get<double>());
    if (v.is_number() || v.is_boolean()) return v.dump();
    if (v.is_array()) {
      std::string out;
      for (const auto& e : v) {
        if (!out.empty()) out += ',';
        out += e.is_string() ? e.get<std::string>() : (e.is_number_float() ? fmt17(e.get<double>()) : e.dump());
      }
      return out;
    }
    throw UsageError("config value for '" + key + "' has an unsupported type");
  }

  std::string str(const std::string& key, const std::optional<std::string>& def = std::nullopt) {
    auto v = raw(key);
    if (!v) {
      if (!def) throw UsageError("missing required option --" + key);
      v = def;
    }
    resolved[key] = *v;
    return *v;
  }

  double real(const std::string& key, std::optional<double> def = std::nullopt) {
    const auto v = raw(key);
    if (!v) {
      if (!def) throw UsageError("missing required option --" + key);
      resolved[key] = *def;
      return *def;
    }
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(*v, &used);
    } catch (const std::exception&) {
      throw UsageError("--" + key + ": '" + *v + "' is not a number");
    }
    if (used != v->size() || !std::isfinite(x)) throw UsageError("--" + key + ": '" + *v + "' is not a number");
    resolved[key] = x;
    return x;
  }

  long integer(const std::string& key, std::optional<long> def = std::nullopt) {
    const auto v = raw(key);
    if (!v) {
      if (!def) throw UsageError("missing required option --" + key);
      resolved[key] = *def;
      return *def;
    }
    std::size_t used = 0;
    long x = 0;
    try {
      x = std::stol(*v, &used);
    } catch (const std::exception&) {
      throw UsageError("--" + key + ": '" + *v + "' is not an integer");
    }
    if (used != v->size()) throw UsageError("--" + key + ": '" + *v + "' is not an integer");
    resolved[key] = x;
    return x;
  }

  /// Mesh sizes as exact fractions; the manifest keeps the original text.
  std::vector<double> mesh_list(const std::string& key, const std::optional<std::string>& def = std::nullopt) {
    const std::string text = str(key, def);
    std::vector<double> out;
    for (const auto& part : split(text, ',')) out.push_back(parse_fraction(part));
    if (out.empty()) throw UsageError("--" + key + " is empty");
    return out;
  }
};

struct Common {
  fs::path out;
  int threads = 0;
  QuadConfig quad;
  std::optional<fs::path> cache;
};

void bind_common(CLI::App* app, Settings& s, bool quad = true, bool cache = false) {
  app->add_option("--config", s.config_path, "JSON config (flags override it); a manifest.json is accepted");
  s.bind(app, "out", "Output directory");
  s.bind(app, "threads", "Worker threads for stencil assembly (0 = all cores)");
  if (quad) {
    s.bind(app, "quad-rel-tol", "Quadrature relative tolerance");
    s.bind(app, "quad-abs-tol", "Quadrature absolute tolerance");
  }
  if (cache) s.bind(app, "stencil-cache", "Stencil cache directory (default: $FRACLAP_CACHE_DIR)");
}

Common resolve_common(Settings& s, bool quad = true, bool cache = false) {
  Common c;
  c.out = s.str("out", std::string("."));
  c.threads = static_cast<int>(s.integer("threads", 0));
  if (c.threads < 0) throw UsageError("--threads must be >= 0");
  if (quad) {
    c.quad.rel_tol = s.real("quad-rel-tol", 1e-12);
    c.quad.abs_tol = s.real("quad-abs-tol", 1e-15);
    c.quad.validate();
  }
  if (cache) {
    const char* env = std::getenv("FRACLAP_CACHE_DIR");
    const std::string dir = s.str("stencil-cache", std::string(env ? env : ""));
    if (!dir.empty()) c.cache = fs::path(dir);
  }
  return c;
}

FracParams resolve_params(Settings& s, std::optional<double> alpha_default = std::nullopt) {
  FracParams p;
  p.d = static_cast<int>(s.integer("dim", 2));
  p.alpha = s.real("alpha", alpha_default);
  p.gamma = s.real("gamma", 2.0);
  p.validate();
  return p;
}

CgConfig resolve_cg(Settings& s, double tol_default) {
  CgConfig cg;
  cg.tol = s.real("cg-tol", tol_default);
  cg.max_iter = s.integer("cg-max-iter", 0);
  cg.validate();
  return cg;
}

// Collects output files and timing, then writes manifest.json.
class Run {
 public:
  Run(std::string command, const fs::path& out, const Settings& s, const std::vector<std::string>& argv)
      : command_(std::move(command)), out_(out), t0_(std::chrono::steady_clock::now()) {
    manifest_["tool"] = "fraclap";
    manifest_["version"] = FRACLAP_VERSION;
    manifest_["command"] = command_;
    manifest_["argv"] = argv;
    manifest_["config"] = s.resolved;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest_["started_at"] = buf;
    manifest_["outputs"] = json::array();
    manifest_["timings"] = json::object();
    fs::create_directories(out_);
  }

  fs::path file(const std::string& name) {
    manifest_["outputs"].push_back(name);
    return out_ / name;
  }
  void timing(const std::string& key, double seconds) { manifest_["timings"][key] = seconds; }
  json& extra() { return manifest_["diagnostics"]; }

  void finish(const std::string& status, const std::string& error = "") {
    manifest_["status"] = status;
    if (!error.empty()) manifest_["error"] = error;
    manifest_["timings"]["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::ofstream os(out_ / "manifest.json");
    os << manifest_.dump(2) << '\n';
  }

 private:
  std::string command_;
  fs::path out_;
  std::chrono::steady_clock::time_point t0_;
  json manifest_;
};

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

void write_study_csv(const fs::path& path, const StudyReport& r, bool with_extra) {
  std::vector<std::string> header{"h", "err_inf", "rate_inf", "err_2", "rate_2"};
  if (with_extra) {
    header.push_back("argmax_boundary_dist");
    header.push_back("cg_iters");
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < r.h.size(); ++i) {
    std::vector<std::string> row{fmt17(r.h[i]), fmt17(r.err_inf[i]), fmt17(r.rate_inf[i]), fmt17(r.err_2[i]),
                                 fmt17(r.rate_2[i])};
    if (with_extra) {
      row.push_back(fmt17(r.argmax_boundary_dist[i]));
      row.push_back(i < r.cg_iters.size() ? std::to_string(r.cg_iters[i]) : "");
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

std::string level_name(const std::string& prefix, int N) { return prefix + "_N" + std::to_string(N) + ".frlp"; }

// ---------------------------------------------------------------- op-error

struct OpErrorCmd {
  Settings s;
  void setup(CLI::App* app) {
    bind_common(app, s);
    s.bind(app, "dim", "Dimension (2 or 3)");
    s.bind(app, "alpha", "Fractional power in (0,2)");
    s.bind(app, "gamma", "Splitting parameter in (alpha,2]");
    s.bind(app, "s", "Exponent of the manufactured function");
    s.bind(app, "h", "Comma-separated mesh sizes, e.g. 1/16,1/32");
    s.bind(app, "ref-h", "Reference mesh size");
  }
  int run(const std::vector<std::string>& argv) {
    s.load_config();
    const Common c = resolve_common(s);
    const FracParams p = resolve_params(s);
    const double sexp = s.real("s", 1.0);
    const auto h = s.mesh_list("h");
    const double ref_h = s.mesh_list("ref-h").at(0);
    ManufacturedFn{sexp, p.d}.validate();
    validate_study_levels(h, ref_h);

    Run run("op-error", c.out, s, argv);
    try {
      const StudyReport r = truncation_study(p, sexp, h, ref_h, StudyOptions{c.quad, {}, c.threads});
      write_study_csv(run.file("op_error.csv"), r, false);
      run.timing("study_seconds", r.seconds);
      run.finish("ok");
    } catch (const std::exception& e) {
      run.finish("failed", e.what());
      throw;
    }
    return 0;
  }
};

// ---------------------------------------------------------------- poisson

struct PoissonCmd {
  Settings s;
  void setup(CLI::App* app) {
    bind_common(app, s, true, true);
    s.bind(app, "dim", "Dimension (2 or 3)");
    s.bind(app, "alpha", "Fractional power in (0,2)");
    s.bind(app, "gamma", "Splitting parameter in (alpha,2]");
    s.bind(app, "h", "Comma-separated mesh sizes on (-1,1)^d");
    s.bind(app, "ref-h", "Reference mesh for the right-hand side (manufactured) or the error (one); without it, f = 1 errors compare h with h/2");
    s.bind(app, "rhs", "'one' or 'manufactured:s=<exponent>'");
    s.bind(app, "cg-tol", "CG relative residual tolerance");
    s.bind(app, "cg-max-iter", "CG iteration cap (0 = 10 sqrt(M) + 100)");
  }

  int run(const std::vector<std::string>& argv) {
    s.load_config();
    const Common c = resolve_common(s, true, true);
    const FracParams p = resolve_params(s);
    const auto h = s.mesh_list("h");
    const std::string rhs = s.str("rhs", std::string("one"));
    const CgConfig cg = resolve_cg(s, 1e-10);
    std::optional<double> ref_h;
    if (s.raw("ref-h")) ref_h = s.mesh_list("ref-h").at(0);

    std::optional<double> sexp;
    if (rhs.rfind("manufactured", 0) == 0) {
      const std::string rest = rhs.substr(std::string("manufactured").size());
      if (rest.empty()) {
        sexp = 2.0;
      } else if (rest.rfind(":s=", 0) == 0) {
        try {
          std::size_t used = 0;
          sexp = std::stod(rest.substr(3), &used);
          if (used != rest.size() - 3) throw UsageError("");
        } catch (const std::exception&) {
          throw UsageError("malformed --rhs '" + rhs + "'");
        }
      } else {
        throw UsageError("malformed --rhs '" + rhs + "'");
      }
      ManufacturedFn{*sexp, p.d}.validate();
    } else if (rhs != "one") {
      throw UsageError("unknown --rhs '" + rhs + "' (expected 'one' or 'manufactured:s=<exponent>')");
    }
    if (ref_h) validate_study_levels(h, *ref_h);
    for (double hv : h) mesh_count(2.0, hv);

    Run run("poisson", c.out, s, argv);
    try {
      const StudyOptions opt{c.quad, cg, c.threads};
      if (ref_h || !sexp) {
        // f = 1 without a reference mesh: errors are differences to the next finer mesh
        const StudyReport r = sexp    ? poisson_manufactured_study(p, *sexp, h, *ref_h, opt)
                              : ref_h ? poisson_self_convergence(p, h, *ref_h, opt)
                                      : poisson_successive_study(p, h, opt);
        for (const Field& u : r.solutions) write_field(run.file(level_name("poisson_u", u.grid.N)), u);
        write_study_csv(run.file("poisson_error.csv"), r, true);
        run.timing("study_seconds", r.seconds);
        run.extra()["cg_iters"] = r.cg_iters;
      } else {
        solve_levels(run, c, p, h, sexp, cg);
      }
      run.finish("ok");
    } catch (const std::exception& e) {
      run.finish("failed", e.what());
      throw;
    }
    return 0;
  }

  // Each level on its own: f = 1, or f = A_h u for the manufactured u (same mesh).
  void solve_levels(Run& run, const Common& c, const FracParams& p, const std::vector<double>& h,
                    std::optional<double> sexp, const CgConfig& cg) {
    StudyReport r;
    r.params = p;
    json cache = json::array();
    for (double hv : h) {
      const int N = mesh_count(2.0, hv);
      const GridSpec g = GridSpec::cube(p.d, -1.0, 1.0, N);
      bool hit = false;
      const Stencil st = cached_stencil(c.cache, p, N, g.h, c.quad, c.threads, &hit);
      cache.push_back(hit);
      const FractionalOperator op(st, g);
      Field f(g, 1.0);
      Field exact;
      if (sexp) {
        exact = manufactured_field(ManufacturedFn{*sexp, p.d}, g);
        f = apply_fft(op, exact);
      }
      const PoissonResult sol = poisson_solve(op, f, cg);
      if (!sol.converged) throw Error("CG did not converge at h = " + fmt17(hv));
      write_field(run.file(level_name("poisson_u", N)), sol.u);
      r.h.push_back(hv);
      r.cg_iters.push_back(sol.iters);
      double einf = 0.0, sq = 0.0, umax = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = sexp ? std::abs(sol.u.values[i] - exact.values[i]) : sol.u.values[i];
        if (v > umax) {
          umax = v;
          arg = i;
        }
        if (sexp) {
          einf = std::max(einf, v);
          sq += v * v;
        }
      }
      r.err_inf.push_back(sexp ? einf : std::nan(""));
      r.err_2.push_back(sexp ? std::sqrt(std::pow(g.h, g.d) * sq) : std::nan(""));
      const std::size_t nx = g.n[0], ny = g.n[1];
      const int idx[3] = {int(arg % nx), int((arg / nx) % ny), int(arg / (nx * ny))};
      double dist = 1e300;
      for (int a = 0; a < g.d; ++a) {
        const double x = g.coord(a, idx[a]);
        dist = std::min({dist, x - g.lo[a], g.hi[a] - x});
      }
      r.argmax_boundary_dist.push_back(dist);
    }
    run.extra()["stencil_cache_hits"] = cache;
    run.extra()["cg_iters"] = r.cg_iters;
    if (sexp) {
      r.rate_inf = convergence_rates(r.err_inf, r.h);
      r.rate_2 = convergence_rates(r.err_2, r.h);
      write_study_csv(run.file("poisson_error.csv"), r, true);
    } else {
      run.extra()["argmax_boundary_dist"] = r.argmax_boundary_dist;
    }
  }
};

// ---------------------------------------------------------------- allen-cahn

struct AllenCahnCmd {
  Settings s;
  void setup(CLI::App* app) {
    bind_common(app, s, true, true);
    s.bind(app, "dim", "Dimension (2 or 3)");
    s.bind(app, "alpha", "Fractional power in (0,2)");
    s.bind(app, "gamma", "Splitting parameter in (alpha,2]");
    s.bind(app, "h", "Mesh size on (0,1)^d");
    s.bind(app, "delta", "Interface width");
    s.bind(app, "tau", "Time step");
    s.bind(app, "t-end", "Final time");
    s.bind(app, "snapshot-every", "Steps between field dumps");
    s.bind(app, "centers", "Bubble centers 'x,y[,z];x,y[,z]'");
    s.bind(app, "radius-offset", "Bubble radius");
    s.bind(app, "picard-tol", "Picard max-norm increment tolerance");
    s.bind(app, "picard-max", "Picard iteration cap");
    s.bind(app, "picard-shift", "Linear shift in the Picard sweep (negative = 1/(2 delta^alpha), 0 = plain)");
    s.bind(app, "cg-tol", "CG relative residual tolerance");
    s.bind(app, "cg-max-iter", "CG iteration cap (0 = 10 sqrt(M) + 100)");
  }

  int run(const std::vector<std::string>& argv) {
    s.load_config();
    const Common c = resolve_common(s, true, true);
    AllenCahnConfig cfg;
    const FracParams p = resolve_params(s, 1.9);
    cfg.d = p.d;
    cfg.alpha = p.alpha;
    cfg.gamma = p.gamma;
    const double h = s.mesh_list("h", std::string("1/256")).at(0);
    cfg.delta = s.real("delta", 0.03);
    cfg.tau = s.real("tau", 1e-3);
    cfg.t_end = s.real("t-end", 0.05);
    cfg.snapshot_every = static_cast<int>(s.integer("snapshot-every", 10));
    cfg.radius_offset = s.real("radius-offset", 0.12);
    cfg.picard_tol = s.real("picard-tol", 1e-8);
    cfg.picard_max = static_cast<int>(s.integer("picard-max", 50));
    cfg.picard_shift = s.real("picard-shift", -1.0);
    cfg.cg = resolve_cg(s, 1e-12);
    const std::string centers =
        s.str("centers", std::string(cfg.d == 3 ? "0.4,0.6,0.5;0.6,0.4,0.5" : "0.4,0.4;0.6,0.6"));
    const auto pts = split(centers, ';');
    if (pts.size() != 2) throw UsageError("--centers needs two points separated by ';'");
    for (int k = 0; k < 2; ++k) {
      const auto xs = split(pts[k], ',');
      if (static_cast<int>(xs.size()) != cfg.d) throw UsageError("--centers: each point needs d coordinates");
      for (int a = 0; a < cfg.d; ++a) {
        try {
          cfg.centers[k][a] = std::stod(xs[a]);
        } catch (const std::exception&) {
          throw UsageError("--centers: malformed coordinate '" + xs[a] + "'");
        }
      }
    }
    const GridSpec grid = GridSpec::cube(cfg.d, 0.0, 1.0, mesh_count(1.0, h));
    cfg.validate(grid);

    Run run("allen-cahn", c.out, s, argv);
    try {
      bool hit = false;
      const auto t0 = std::chrono::steady_clock::now();
      const Stencil st = cached_stencil(c.cache, p, grid.N, grid.h, c.quad, c.threads, &hit);
      const FractionalOperator op(st, grid);
      run.timing("assembly_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      run.extra()["stencil_cache_hit"] = hit;

      std::vector<std::vector<std::string>> snaps;
      const AllenCahnResult res = allen_cahn_run(cfg, grid, op, [&](const AllenCahnSnapshot& sn) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%06ld.frlp", sn.step);
        write_field(run.file(name), sn.u);
        snaps.push_back({std::to_string(sn.step), fmt17(sn.t), sn.connected ? "1" : "0", name});
      });

      std::vector<std::vector<std::string>> mass_rows, step_rows;
      for (std::size_t i = 0; i < res.mass_series.size(); ++i) {
        mass_rows.push_back({fmt17(res.mass_series[i][0]), fmt17(res.mass_series[i][1])});
        if (i > 0)
          step_rows.push_back({std::to_string(i), fmt17(res.mass_series[i][0]), std::to_string(res.picard_iters[i - 1]),
                               std::to_string(res.cg_iters[i - 1])});
      }
      write_csv(run.file("mass.csv"), {"t", "mass"}, mass_rows);
      write_csv(run.file("snapshots.csv"), {"step", "t", "connected", "file"}, snaps);
      write_csv(run.file("steps.csv"), {"step", "t", "picard_iters", "cg_iters"}, step_rows);
      run.timing("time_stepping_seconds", res.seconds);
      run.extra()["max_abs_u"] = res.max_abs_u;
      run.extra()["picard_shift"] = cfg.resolved_shift();
      run.finish("ok");
    } catch (const std::exception& e) {
      run.finish("failed", e.what());
      throw;
    }
    return 0;
  }
};

// ---------------------------------------------------------------- stencil

struct StencilCmd {
  Settings build, inspect, verify;
  std::string inspect_file, verify_file;
  CLI::App* build_app = nullptr;
  CLI::App* inspect_app = nullptr;
  CLI::App* verify_app = nullptr;

  void setup(CLI::App* app) {
    app->require_subcommand(1);
    build_app = app->add_subcommand("build", "Assemble a stencil and store it");
    bind_common(build_app, build, true, true);
    build.bind(build_app, "dim", "Dimension (2 or 3)");
    build.bind(build_app, "alpha", "Fractional power in (0,2)");
    build.bind(build_app, "gamma", "Splitting parameter in (alpha,2]");
    build.bind(build_app, "N", "Cells on the longest side");
    build.bind(build_app, "h", "Mesh size");
    build.bind(build_app, "file", "Output file (default: cache directory)");

    inspect_app = app->add_subcommand("inspect", "Print the header and leading coefficients");
    inspect_app->add_option("file", inspect_file, "Stencil file")->required();

    verify_app = app->add_subcommand("verify", "Recompute random coefficients and compare");
    verify_app->add_option("file", verify_file, "Stencil file")->required();
    bind_common(verify_app, verify, false, false);
    verify.bind(verify_app, "samples", "Number of random coefficients");
    verify.bind(verify_app, "seed", "Random seed");
    verify.bind(verify_app, "tol", "Relative tolerance");
  }

  int run(const std::vector<std::string>& argv) {
    if (build_app->parsed()) return run_build(argv);
    if (inspect_app->parsed()) return run_inspect();
    return run_verify(argv);
  }

  int run_build(const std::vector<std::string>& argv) {
    build.load_config();
    const Common c = resolve_common(build, true, true);
    const FracParams p = resolve_params(build);
    const long N = build.integer("N");
    const double h = build.mesh_list("h").at(0);
    if (N < 2) throw UsageError("--N must be >= 2");
    std::string file = build.str("file", std::string(""));
    if (file.empty()) {
      if (!c.cache) throw UsageError("no --file given and no stencil cache configured (FRACLAP_CACHE_DIR)");
      file = (*c.cache / stencil_cache_name(p, static_cast<int>(N), h, c.quad.rel_tol)).string();
    }
    Run run("stencil build", c.out, build, argv);
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const Stencil st = build_stencil(p, static_cast<int>(N), h, c.quad, c.threads);
      run.timing("assembly_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      write_stencil(file, st);
      run.extra()["file"] = file;
      run.finish("ok");
      std::cout << file << '\n';
    } catch (const std::exception& e) {
      run.finish("failed", e.what());
      throw;
    }
    return 0;
  }

  int run_inspect() {
    const Stencil st = read_stencil(inspect_file);
    json j;
    j["d"] = st.params.d;
    j["alpha"] = st.params.alpha;
    j["gamma"] = st.params.gamma;
    j["N"] = st.N;
    j["h"] = st.h;
    j["rel_tol"] = st.rel_tol;
    j["c_norm"] = st.c_norm;
    j["tail"] = st.tail;
    const bool two = st.params.d == 2;
    j["a_origin"] = two ? st.a(0, 0) : st.a(0, 0, 0);
    j["a_axis"] = two ? st.a(1, 0) : st.a(1, 0, 0);
    j["a_diag"] = two ? st.a(1, 1) : st.a(1, 1, 1);
    j["origin_identity"] = st.origin_identity();
    std::cout << j.dump(2) << '\n';
    return 0;
  }

  int run_verify(const std::vector<std::string>& argv) {
    verify.load_config();
    const Common c = resolve_common(verify, false, false);
    const long samples = verify.integer("samples", 10);
    const long seed = verify.integer("seed", 0);
    const double tol = verify.real("tol", 1e-12);
    if (samples < 1) throw UsageError("--samples must be >= 1");
    const Stencil st = read_stencil(verify_file);

    Run run("stencil verify", c.out, verify, argv);
    QuadConfig q;
    q.rel_tol = st.rel_tol;
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::uniform_int_distribution<int> pick(0, st.N);
    double worst = 0.0;
    json checked = json::array();
    for (long k = 0; k < samples; ++k) {
      std::vector<int> idx(st.params.d);
      do {
        for (int& v : idx) v = pick(rng);
      } while (std::all_of(idx.begin(), idx.end(), [](int v) { return v == 0; }));
      const double stored = st.params.d == 2 ? st.a(idx[0], idx[1]) : st.a(idx[0], idx[1], idx[2]);
      const double fresh = recompute_coefficient(st, idx, q);
      const double rel = std::abs(stored - fresh) / std::max(std::abs(fresh), 1e-300);
      worst = std::max(worst, rel);
      checked.push_back({{"index", idx}, {"stored", stored}, {"recomputed", fresh}, {"rel_err", rel}});
    }
    const double a0 = st.params.d == 2 ? st.a(0, 0) : st.a(0, 0, 0);
    const double origin_rel = std::abs(st.origin_identity() - a0) / std::abs(a0);
    run.extra()["checked"] = checked;
    run.extra()["max_rel_err"] = worst;
    run.extra()["origin_identity_rel_err"] = origin_rel;
    const bool ok = worst <= tol && origin_rel <= 1e-10;
    run.finish(ok ? "ok" : "failed", ok ? "" : "coefficient mismatch");
    std::cout << (ok ? "ok" : "MISMATCH") << " max_rel_err=" << fmt17(worst) << " origin_rel_err=" << fmt17(origin_rel)
              << '\n';
    return ok ? 0 : kExitCompute;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite difference solvers for the integral fractional Laplacian"};
  app.set_version_flag("--version", FRACLAP_VERSION);
  // "--h" is a mesh-size option, so help keeps only its long form
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  OpErrorCmd op_error;
  PoissonCmd poisson;
  AllenCahnCmd allen;
  StencilCmd stencil;
  auto* op_app = app.add_subcommand("op-error", "Operator truncation error study on (-1,1)^d");
  auto* poisson_app = app.add_subcommand("poisson", "Fractional Poisson problem on (-1,1)^d");
  auto* ac_app = app.add_subcommand("allen-cahn", "Fractional Allen-Cahn two-bubble run on (0,1)^d");
  auto* st_app = app.add_subcommand("stencil", "Build, inspect or verify stencil files");
  op_error.setup(op_app);
  poisson.setup(poisson_app);
  allen.setup(ac_app);
  stencil.setup(st_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    if (op_app->parsed()) return op_error.run(args);
    if (poisson_app->parsed()) return poisson.run(args);
    if (ac_app->parsed()) return allen.run(args);
    return stencil.run(args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NonNestedGrids& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCorrupt;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCompute;
  }
}
