#include "pmc/run.hpp"

#include "pmc/geodesic.hpp"
#include "pmc/meancurv.hpp"
#include "pmc/smallmat.hpp"

#include "json.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <thread>

namespace pmc {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;

std::string fmt17(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

double norm_d(int d, const double* v) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
}

// Least-squares slope of log(err) against log(r), with a floor on err so
// an exactly vanishing residual cannot poison the fit.
double fit_slope(const std::vector<double>& r, const std::vector<double>& e) {
  const int m = (int)r.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(m), ly(m);
  for (int i = 0; i < m; ++i) {
    lx[i] = std::log(r[i]);
    ly[i] = std::log(std::max(e[i], 1e-300));
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < m; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

// Unit direction s of m on S^{d-1}: equal angles on the circle, a
// Fibonacci lattice on the sphere.
void unit_direction(int d, int s, int m, double* w) {
  if (d == 2) {
    const double th = 2.0 * kPi * s / m;
    w[0] = std::cos(th);
    w[1] = std::sin(th);
    return;
  }
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - (2.0 * s + 1.0) / m;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  w[0] = rho * std::cos(ga * s);
  w[1] = rho * std::sin(ga * s);
  w[2] = z;
}

double origin_G_norm(const Problem& prob) {
  const double tau0[3] = {};
  const OuterResult og = outer_G(prob, 0.0, tau0);
  return norm_d(prob.dim(), og.G);
}

struct ModeChoice {
  SolveMode mode = SolveMode::nondegenerate;
  std::string name = "nondegenerate";
  bool via_index = false;
  int degree = 0;
};

// Decide the solve mode for an automatic run: Newton when the Hessian is
// comfortably invertible, otherwise fall back on the index. A flat
// prescription (G(0, .) identically zero near the origin) has a singular
// Hessian yet every tau is already converged, so it stays with Newton.
// Returns the refusal message, empty on success.
std::string resolve_mode(const Problem& prob, RunMode requested,
                         ModeChoice& out) {
  out = ModeChoice{};
  if (requested == RunMode::nondegenerate) return "";
  if (requested == RunMode::degenerate) {
    out.mode = SolveMode::degenerate;
    out.name = "degenerate";
    return "";
  }

  const int d = prob.dim();
  if (smallmat::cond_sym(d, prob.hess_p()) <= 1e8) return "";

  bool flat = true;
  for (int s = 0; s < 64 && flat; ++s) {
    double tau[3] = {};
    unit_direction(d, s, 64, tau);
    for (int i = 0; i < d; ++i) tau[i] *= 0.5 * prob.opts.rho;
    const OuterResult og = outer_G(prob, 0.0, tau);
    if (norm_d(d, og.G) > 1e-12) flat = false;
  }
  if (flat) return "";

  DegreeReport rep;
  try {
    rep = index_gradient(prob, prob.opts.rho);
  } catch (const std::exception& e) {
    return std::string("cannot certify an index for the degenerate critical "
                       "point: ") +
           e.what();
  }
  if (rep.degree == 0)
    return "the critical point has index 0: the degree argument gives no "
           "solvable family on this ball";
  out.mode = SolveMode::degenerate;
  out.name = "degenerate";
  out.via_index = true;
  out.degree = rep.degree;
  return "";
}

json leaf_json(int k, int dim, const FamilyLeaf& leaf) {
  json j;
  j["k"] = k;
  j["r"] = leaf.r;
  json tau = json::array();
  for (int i = 0; i < dim; ++i) tau.push_back(leaf.tau_bar[i]);
  j["tau"] = tau;
  j["residual_sup"] = leaf.residual_sup;
  j["inner_iters"] = leaf.inner_iters;
  j["outer_iters"] = leaf.outer_iters;
  return j;
}

bool check_folland(json& out) {
  double worst = 0.0;
  int tuples = 0;
  for (int n = 1; n <= 2; ++n) {
    const SphereGrid g(n, 8);
    const int d = n + 1;
    for (int a0 = 0; a0 <= 8; ++a0)
      for (int a1 = 0; a0 + a1 <= 8; ++a1) {
        const int a2max = (n == 2) ? 8 - a0 - a1 : 0;
        for (int a2 = 0; a2 <= a2max; ++a2) {
          const int alpha[3] = {a0, a1, a2};
          double quad = 0.0;
          for (int i = 0; i < g.num_nodes(); ++i) {
            double w[3];
            g.node_omega(i, w);
            double t = g.weight(i);
            for (int j = 0; j < d; ++j) t *= std::pow(w[j], alpha[j]);
            quad += t;
          }
          worst = std::max(worst, std::abs(quad - sphere_moment(n, alpha)));
          ++tuples;
        }
      }
  }
  out["tuples"] = tuples;
  out["max_error"] = worst;
  return worst <= 1e-10;
}

bool check_u0(const ProblemConfig& cfg, json& out) {
  const double p0[3] = {};
  const Problem prob(cfg.chart, cfg.f, p0, cfg.L, cfg.tolerances);
  const InnerResult r0 = inner_solve(prob, 0.0, nullptr);
  std::vector<double> nodes(prob.grid().num_nodes());
  prob.grid().synthesize(r0.u.data(), nodes.data());
  double sup = 0.0;
  for (double v : nodes) sup = std::max(sup, std::abs(v));
  out["residual"] = r0.residual;
  out["u0_sup"] = sup;
  return r0.residual <= 1e-10;
}

// Remainder decay of the three order-r^2 expansions, measured on a fixed
// analytic test profile with a degree-3 part. The curvature model uses
// the closed-form shifted Laplacian of that profile, so a grid too
// coarse to carry degree 3 aliases the profile and the measured slope
// drops to 2; that is exactly the failure this check exists to catch.
bool check_slopes(const ProblemConfig& cfg, json& out) {
  const double p0[3] = {};
  const int dim = cfg.dim, n = dim - 1;
  const Frame frame = orthonormal_frame(cfg.chart, p0);
  const SphereGrid grid(n, cfg.L);
  RescaledMetric gm(cfg.chart, p0, frame);

  const int nn = grid.num_nodes();
  std::vector<double> unodes(nn), lap(nn);
  for (int i = 0; i < nn; ++i) {
    if (n == 1) {
      const double th = grid.theta(i);
      unodes[i] = 0.7 + 0.4 * std::cos(3.0 * th);
      lap[i] = 0.7 - 3.2 * std::cos(3.0 * th);
    } else {
      double w[3];
      grid.node_omega(i, w);
      unodes[i] = 0.7 + 0.4 * w[0] * w[1] * w[2];
      lap[i] = 1.4 - 4.0 * w[0] * w[1] * w[2];
    }
  }
  std::vector<double> uc(grid.num_coeffs());
  grid.analyze(unodes.data(), uc.data());

  gm.set_leaf(0.0, nullptr);
  double ric[9];
  gm.frame_ricci(ric);

  const std::vector<double> radii = {0.1, 0.05, 0.025, 0.0125};
  std::vector<double> hr, fr, ft;
  for (double r : radii) {
    gm.set_leaf(r, nullptr);
    const std::vector<double> H = mean_curvature(gm, grid, uc.data());
    double worst = 0.0;
    for (int i = 0; i < nn; ++i) {
      double w[3];
      grid.node_omega(i, w);
      double q = 0.0;
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) q += ric[a * dim + b] * w[a] * w[b];
      const double model = n + r * r * (lap[i] - q / 3.0);
      worst = std::max(worst, std::abs(H[i] - model));
    }
    hr.push_back(worst);
    const ExpansionResiduals er =
        expansion_residuals(cfg.chart, p0, frame, cfg.f, grid, uc.data(), r);
    fr.push_back(er.f_resid);
    ft.push_back(er.ftau_resid);
  }
  const double sh = fit_slope(radii, hr);
  const double sf = fit_slope(radii, fr);
  const double st = fit_slope(radii, ft);
  out["radii"] = radii;
  out["h_resid"] = hr;
  out["f_resid"] = fr;
  out["ftau_resid"] = ft;
  out["h_slope"] = sh;
  out["f_slope"] = sf;
  out["ftau_slope"] = st;
  // A flat chart with polynomial f can satisfy an expansion exactly; a
  // residual pinned at roundoff carries no slope, and the remainder bound
  // holds vacuously there.
  auto series_ok = [](double slope, const std::vector<double>& e) {
    double sup = 0.0;
    for (double v : e) sup = std::max(sup, v);
    return slope >= 2.9 || sup <= 1e-12;
  };
  return series_ok(sh, hr) && series_ok(sf, fr) && series_ok(st, ft);
}

bool check_foliation(const ProblemConfig& cfg, const ModeChoice& mc,
                     const std::string& refusal, json& out) {
  if (!refusal.empty()) {
    out["error"] = refusal;
    return false;
  }
  const double p0[3] = {};
  const Problem prob(cfg.chart, cfg.f, p0, cfg.L, cfg.tolerances);
  const BuildResult fam = build_family(prob, cfg.r_grid.radii(), mc.mode);
  out["n_leaves"] = fam.leaves.size();
  out["complete"] = fam.complete;
  if (!fam.complete) {
    out["error"] = fam.fail_message;
    return false;
  }
  const FoliationReport rep = foliation_check(prob, fam.leaves);
  out["enough_leaves"] = rep.enough_leaves;
  out["tau_slope_skipped"] = rep.tau_slope_skipped;
  if (!rep.tau_slope_skipped) out["tau_slope"] = rep.tau_slope;
  out["min_gap"] = rep.min_gap;
  out["disjoint"] = rep.disjoint_ok;
  out["monotone"] = rep.monotone_ok;
  return rep.ok();
}

bool check_uniqueness(const ProblemConfig& cfg, const ModeChoice& mc,
                      const std::string& refusal, json& out) {
  if (!refusal.empty()) {
    out["error"] = refusal;
    return false;
  }
  if (mc.mode == SolveMode::degenerate) {
    out["skipped"] = true;
    return true;
  }
  out["skipped"] = false;
  const double p0[3] = {};
  const Problem prob(cfg.chart, cfg.f, p0, cfg.L, cfg.tolerances);
  const std::vector<double> radii = cfg.r_grid.radii();
  const double r = radii[radii.size() / 2];
  const UniquenessReport rep = uniqueness_probe(prob, r, 5);
  out["r"] = r;
  out["attempted"] = rep.attempted;
  out["converged"] = rep.converged;
  out["tau_spread"] = rep.tau_spread;
  out["u_spread"] = rep.u_spread;
  if (!rep.failures.empty()) out["failures"] = rep.failures;
  return rep.ok;
}

} // namespace

void write_leaves_csv(std::ostream& out, int dim,
                      const std::vector<FamilyLeaf>& leaves) {
  out << "k,r";
  for (int i = 1; i <= dim; ++i) out << ",tau" << i;
  out << ",residual_sup,inner_iters,outer_iters\n";
  for (size_t k = 0; k < leaves.size(); ++k) {
    const FamilyLeaf& leaf = leaves[k];
    out << k << ',' << fmt17(leaf.r);
    for (int i = 0; i < dim; ++i) out << ',' << fmt17(leaf.tau_bar[i]);
    out << ',' << fmt17(leaf.residual_sup) << ',' << leaf.inner_iters << ','
        << leaf.outer_iters << '\n';
  }
}

void write_coeff_csv(std::ostream& out, const SphereGrid& grid,
                     const std::vector<double>& u) {
  out << "l,m,value\n";
  for (int k = 0; k < grid.num_coeffs(); ++k) {
    const int l = grid.deg(k);
    int m = 0;
    if (grid.n() == 1)
      m = (k == 0) ? 0 : (k % 2 == 1 ? -l : l);
    else
      m = k - l * l - l;
    out << l << ',' << m << ',' << fmt17(u[k]) << '\n';
  }
}

int cmd_solve(const ProblemConfig& cfg, const std::string& out_dir,
              std::ostream& log) {
  const double p0[3] = {};
  const Problem prob(cfg.chart, cfg.f, p0, cfg.L, cfg.tolerances);

  const double g0 = origin_G_norm(prob);
  if (g0 > 1e-8) {
    log << "no critical point at the chart origin: |G(0,0)| = " << fmt17(g0)
        << "; recenter the chart on a critical point of f\n";
    return 1;
  }

  ModeChoice mc;
  const std::string refusal = resolve_mode(prob, cfg.mode, mc);
  if (!refusal.empty()) {
    log << refusal << "\n";
    return 1;
  }
  log << "mode: " << mc.name;
  if (mc.via_index) log << " (index " << mc.degree << ")";
  log << "\n";

  const std::vector<double> radii = cfg.r_grid.radii();
  const BuildResult fam = build_family(prob, radii, mc.mode);
  if (fam.complete)
    log << "built " << fam.leaves.size() << " leaves\n";
  else
    log << "family stopped after " << fam.leaves.size() << " of "
        << radii.size() << " leaves: " << fam.fail_message << "\n";

  fs::create_directories(fs::path(out_dir) / "coeffs");
  {
    std::ofstream out(fs::path(out_dir) / "leaves.csv", std::ios::binary);
    write_leaves_csv(out, cfg.dim, fam.leaves);
  }
  for (size_t k = 0; k < fam.leaves.size(); ++k) {
    std::ofstream out(
        fs::path(out_dir) / "coeffs" / ("leaf_" + std::to_string(k) + ".csv"),
        std::ios::binary);
    write_coeff_csv(out, prob.grid(), fam.leaves[k].u);
  }

  json rep;
  rep["command"] = "solve";
  rep["dim"] = cfg.dim;
  rep["n"] = prob.n();
  rep["metric"] = cfg.metric_name;
  rep["L"] = cfg.L;
  rep["mode"] = mc.name;
  rep["complete"] = fam.complete;
  rep["n_leaves"] = fam.leaves.size();
  rep["fail_index"] = fam.fail_index;
  rep["fail_message"] = fam.fail_message;
  json jl = json::array();
  for (size_t k = 0; k < fam.leaves.size(); ++k)
    jl.push_back(leaf_json((int)k, cfg.dim, fam.leaves[k]));
  rep["leaves"] = std::move(jl);
  write_json(fs::path(out_dir) / "report.json", rep);

  return fam.complete ? 0 : 2;
}

int cmd_verify(const ProblemConfig& cfg, const std::string& out_dir, int jobs,
               std::ostream& log) {
  const double p0[3] = {};

  // Resolve the mode once up front; the foliation and uniqueness checks
  // consume the result.
  ModeChoice mc;
  std::string refusal;
  {
    const Problem prob(cfg.chart, cfg.f, p0, cfg.L, cfg.tolerances);
    const double g0 = origin_G_norm(prob);
    if (g0 > 1e-8)
      refusal =
          "no critical point at the chart origin: |G(0,0)| = " + fmt17(g0);
    else
      refusal = resolve_mode(prob, cfg.mode, mc);
  }
  if (refusal.empty())
    log << "mode: " << mc.name << "\n";
  else
    log << "mode unresolved: " << refusal << "\n";

  constexpr int kChecks = 5;
  const char* names[kChecks] = {"folland", "u0_residual", "expansion_slopes",
                                "foliation", "uniqueness"};
  const std::function<bool(json&)> checks[kChecks] = {
      [&](json& out) { return check_folland(out); },
      [&](json& out) { return check_u0(cfg, out); },
      [&](json& out) { return check_slopes(cfg, out); },
      [&](json& out) { return check_foliation(cfg, mc, refusal, out); },
      [&](json& out) { return check_uniqueness(cfg, mc, refusal, out); },
  };

  json slots[kChecks];
  bool passed[kChecks] = {};
  auto run_one = [&](int i) {
    json detail;
    bool ok = false;
    try {
      ok = checks[i](detail);
    } catch (const std::exception& e) {
      detail["error"] = e.what();
      ok = false;
    }
    json slot;
    slot["pass"] = ok;
    for (auto it = detail.begin(); it != detail.end(); ++it)
      slot[it.key()] = it.value();
    slots[i] = std::move(slot);
    passed[i] = ok;
  };

  // The checks share nothing mutable, so any assignment of checks to
  // threads produces the same slots; the report and log are assembled in
  // fixed order afterwards, which keeps every output byte independent of
  // the job count.
  const int nw = std::min(std::max(jobs, 1), kChecks);
  if (nw <= 1) {
    for (int i = 0; i < kChecks; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int t = 0; t < nw; ++t)
      pool.emplace_back([&] {
        for (int i; (i = next.fetch_add(1)) < kChecks;) run_one(i);
      });
    for (std::thread& th : pool) th.join();
  }

  bool all = true;
  for (int i = 0; i < kChecks; ++i) {
    all = all && passed[i];
    log << (passed[i] ? "[ ok ] " : "[FAIL] ") << names[i];
    if (!passed[i] && slots[i].contains("error"))
      log << ": " << slots[i]["error"].get<std::string>();
    log << "\n";
  }

  fs::create_directories(out_dir);
  json rep;
  rep["command"] = "verify";
  rep["dim"] = cfg.dim;
  rep["metric"] = cfg.metric_name;
  rep["L"] = cfg.L;
  rep["mode"] = refusal.empty() ? mc.name : "unresolved";
  json jc;
  for (int i = 0; i < kChecks; ++i) jc[names[i]] = slots[i];
  rep["checks"] = std::move(jc);
  rep["all_pass"] = all;
  write_json(fs::path(out_dir) / "report.json", rep);

  log << (all ? "all checks passed\n" : "some checks failed\n");
  return all ? 0 : 2;
}

int cmd_index(const ProblemConfig& cfg, const std::string& out_dir,
              std::ostream& log) {
  const double p0[3] = {};
  const Problem prob(cfg.chart, cfg.f, p0, cfg.L, cfg.tolerances);

  DegreeReport rep;
  try {
    rep = index_gradient(prob, cfg.tolerances.rho);
  } catch (const std::exception& e) {
    log << e.what() << "\n";
    return 1;
  }

  log << "index " << rep.degree << " on the ball of radius "
      << fmt17(rep.rho) << " (homotopy "
      << (rep.homotopy_ok ? "certified" : "not certified") << ")\n";

  fs::create_directories(out_dir);
  json j;
  j["command"] = "index";
  j["dim"] = cfg.dim;
  j["degree"] = rep.degree;
  j["homotopy_ok"] = rep.homotopy_ok;
  j["rho"] = rep.rho;
  j["residue"] = rep.residue;
  j["min_boundary_norm"] = rep.min_boundary_norm;
  j["boundary_samples"] = rep.boundary_samples;
  write_json(fs::path(out_dir) / "report.json", j);
  return 0;
}

} // namespace pmc
