#include "pmc/reduction.hpp"

#include "pmc/meancurv.hpp"
#include "pmc/smallmat.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace pmc {

namespace {

constexpr double kPi = 3.14159265358979323846;

double norm2(int d, const double* v) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string fmt_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string fmt_tau(int d, const double* tau) {
  std::string s = "(";
  for (int i = 0; i < d; ++i) {
    if (i) s += ", ";
    s += fmt_g(tau[i]);
  }
  return s + ")";
}

double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int m = (int)x.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < m; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

void zero_kernel(const SphereGrid& grid, std::vector<double>& c) {
  for (int k = 0; k < grid.num_coeffs(); ++k)
    if (grid.deg(k) == 1) c[k] = 0.0;
}

// Source of the u0 equation at the grid nodes: M_ij x^i x^j with
// M = 1/3 (Ric_ij(p) + 3n/(2 f(p)) Hess_ij(p)), both in the frame at p.
std::vector<double> u0_source(const Problem& prob) {
  const SphereGrid& grid = prob.grid();
  const int d = prob.dim();
  const int n = prob.n();

  RescaledMetric gm(prob.chart(), prob.p(), prob.frame());
  gm.set_leaf(0.0, nullptr);
  double ric[9];
  gm.frame_ricci(ric);

  double M[9];
  for (int i = 0; i < d * d; ++i)
    M[i] = (ric[i] + 1.5 * n / prob.fp() * prob.hess_p()[i]) / 3.0;

  std::vector<double> rhs(grid.num_nodes());
  for (int q = 0; q < grid.num_nodes(); ++q) {
    double om[3];
    grid.node_omega(q, om);
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += M[i * d + j] * om[i] * om[j];
    rhs[q] = s;
  }
  return rhs;
}

// Fixed unit directions: equal angles on S^1, a Fibonacci lattice on S^2.
std::vector<std::array<double, 3>> fixed_directions(int d, int m) {
  std::vector<std::array<double, 3>> dirs(m);
  if (d == 2) {
    for (int j = 0; j < m; ++j) {
      const double th = 2.0 * kPi * j / m;
      dirs[j] = {std::cos(th), std::sin(th), 0.0};
    }
    return dirs;
  }
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  for (int j = 0; j < m; ++j) {
    const double z = 1.0 - (2.0 * j + 1.0) / m;
    const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs[j] = {rr * std::cos(ga * j), rr * std::sin(ga * j), z};
  }
  return dirs;
}

} // namespace

Problem::Problem(const MetricChart& chart, const Expr& f, const double* p,
                 int L, ReduceOpts o)
    : opts(o), chart_(&chart), f_(&f), grid_(chart.dim() - 1, L) {
  const int d = chart.dim();
  if (f.dim() != d)
    throw std::invalid_argument("prescription dimension mismatch");
  for (int i = 0; i < d; ++i) p_[i] = p[i];
  frame_ = orthonormal_frame(chart, p_);
  fp_ = f.eval(p_);
  if (!(fp_ > 0.0))
    throw std::invalid_argument(
        "prescription must be positive at the base point (f(p) = " +
        fmt_g(fp_) + ")");
  RescaledMetric gm(chart, p_, frame_);
  gm.set_leaf(0.0, nullptr);
  FrameDerivs fd = covariant_frame_derivs(gm, f, 2);
  for (int i = 0; i < d; ++i) grad_[i] = fd.grad[i];
  for (int i = 0; i < d * d; ++i) hess_[i] = fd.hess[i];
}

std::vector<double> solve_u0(const Problem& prob) {
  const SphereGrid& grid = prob.grid();
  const std::vector<double> rhs = u0_source(prob);

  // The source is even in x, so its kernel part vanishes by parity; any
  // visible mass there means the curvature assembly is broken.
  double b[3];
  grid.k_components(rhs.data(), b);
  if (norm2(prob.dim(), b) > 1e-9 * (1.0 + sup_abs(rhs)))
    throw std::runtime_error(
        "kernel obstruction: the u0 source has a component along the "
        "coordinate functions");

  std::vector<double> unodes(grid.num_nodes());
  grid.solve_shifted(rhs.data(), unodes.data());
  std::vector<double> u(grid.num_coeffs());
  grid.analyze(unodes.data(), u.data());
  zero_kernel(grid, u);
  return u;
}

InnerResult inner_solve(const Problem& prob, double r, const double* tau,
                        const std::vector<double>* seed) {
  const SphereGrid& grid = prob.grid();
  const int n = prob.n();
  const int nn = grid.num_nodes();
  const int nc = grid.num_coeffs();
  if (!(r >= 0.0)) throw std::invalid_argument("leaf radius must be >= 0");

  if (r == 0.0) {
    InnerResult out;
    out.u = solve_u0(prob);
    const std::vector<double> rhs = u0_source(prob);
    std::vector<double> unodes(nn), lap(nn);
    grid.synthesize(out.u.data(), unodes.data());
    grid.apply_shifted_laplacian(unodes.data(), lap.data());
    for (int q = 0; q < nn; ++q)
      out.residual = std::max(out.residual, std::abs(lap[q] - rhs[q]));
    return out;
  }

  RescaledMetric gm(prob.chart(), prob.p(), prob.frame());
  gm.set_leaf(r, tau);

  // The prescription side does not involve u; evaluate it once per (r, tau).
  std::vector<double> F;
  {
    std::vector<double> zero(nc, 0.0);
    F = f_restriction(gm, grid, prob.f(), zero.data());
  }

  InnerResult out;
  out.u = seed ? *seed : solve_u0(prob);
  if ((int)out.u.size() != nc)
    throw std::invalid_argument("inner seed has the wrong coefficient count");
  zero_kernel(grid, out.u);

  const double scale = n / prob.fp();
  // Absolute rounding in the curvature assembly caps how small the scaled
  // residual can get; do not chase the gate below that floor.
  const double tol =
      std::max(prob.opts.inner_tol, 16.0 * n * DBL_EPSILON / (r * r));

  std::vector<double> res(nn), resc(nc), proj(nn);
  double prev = HUGE_VAL;
  for (int it = 0;; ++it) {
    std::vector<double> H = mean_curvature(gm, grid, out.u.data());
    double usup = 0.0;
    for (int q = 0; q < nn; ++q) {
      const double v = H[q] - scale * F[q];
      usup = std::max(usup, std::abs(v));
      res[q] = v / (r * r);
    }
    grid.analyze(res.data(), resc.data());
    zero_kernel(grid, resc);
    grid.synthesize(resc.data(), proj.data());
    const double ressup = sup_abs(proj);

    out.residual = ressup;
    out.residual_unscaled = usup;
    out.iters = it;
    const bool stalled =
        it >= 3 && ressup > 0.5 * prev && ressup <= 100.0 * tol;
    if (ressup <= tol || stalled) {
      out.H = std::move(H);
      out.F = std::move(F);
      return out;
    }
    if (it >= prob.opts.inner_maxit) {
      std::ostringstream os;
      os << "inner solve did not converge: residual " << ressup << " after "
         << it << " iterations (r = " << r << ", tolerance " << tol << ")";
      throw std::runtime_error(os.str());
    }
    prev = ressup;
    for (int k = 0; k < nc; ++k) {
      const int l = grid.deg(k);
      if (l == 1) continue;
      out.u[k] -= resc[k] / (n - l * (l + n - 1));
    }
  }
}

OuterResult outer_G(const Problem& prob, double r, const double* tau,
                    const std::vector<double>* seed) {
  const int d = prob.dim();
  const int n = prob.n();
  OuterResult out;

  if (r == 0.0) {
    RescaledMetric gm(prob.chart(), prob.p(), prob.frame());
    gm.set_leaf(0.0, tau);
    const Jet3 j = prob.f().eval_jet(gm.center(), 1);
    const Frame& E = gm.frame();
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += E.e[i * d + a] * j.grad[a];
      out.G[i] = -(n / prob.fp()) * s;
    }
    return out;
  }

  out.inner = inner_solve(prob, r, tau, seed);
  const double scale = n / prob.fp();
  const int nn = prob.grid().num_nodes();
  std::vector<double> res(nn);
  for (int q = 0; q < nn; ++q)
    res[q] = (out.inner.H[q] - scale * out.inner.F[q]) / r;
  prob.grid().k_components(res.data(), out.G);
  return out;
}

NewtonResult newton_tau(const Problem& prob, double r, const double* tau_seed,
                        const std::vector<double>* u_seed) {
  const int d = prob.dim();
  const int n = prob.n();

  // Frozen Jacobian of the outer map at (0, 0).
  double J[9];
  for (int i = 0; i < d * d; ++i)
    J[i] = -(n / prob.fp()) * prob.hess_p()[i];

  NewtonResult out;
  for (int i = 0; i < d; ++i) out.tau[i] = tau_seed ? tau_seed[i] : 0.0;

  std::vector<double> useed;
  const std::vector<double>* seedp = nullptr;
  if (u_seed) {
    useed = *u_seed;
    seedp = &useed;
  }
  auto adopt = [&](OuterResult& res) {
    if (!res.inner.u.empty()) {
      useed = res.inner.u;
      seedp = &useed;
    }
  };

  OuterResult cur = outer_G(prob, r, out.tau, seedp);
  adopt(cur);
  double curn = norm2(d, cur.G);

  for (int it = 0;; ++it) {
    out.Gnorm = curn;
    out.iters = it;
    if (curn <= prob.opts.outer_tol) {
      out.inner = std::move(cur.inner);
      return out;
    }
    if (it >= prob.opts.newton_maxit) {
      std::ostringstream os;
      os << "outer Newton did not converge: |G| = " << curn << " after " << it
         << " iterations (r = " << r << ")";
      throw std::runtime_error(os.str());
    }

    // Only a needed step requires an invertible Jacobian; a seed that is
    // already converged never gets here.
    if (smallmat::cond_sym(d, J) > 1e8)
      throw std::runtime_error(
          "singular outer Jacobian: Hess f(p) has condition number above "
          "1e8; the critical point looks degenerate, use the degree-based "
          "solver");

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step[3];
      if (!smallmat::solve(d, J, cur.G, step))
        throw std::runtime_error(
            "singular outer Jacobian; the critical point looks degenerate, "
            "use the degree-based solver");
      double lam = 1.0;
      for (int bt = 0; bt < 7; ++bt, lam *= 0.5) {
        double trial[3] = {};
        for (int i = 0; i < d; ++i) trial[i] = out.tau[i] - lam * step[i];
        OuterResult nxt;
        try {
          nxt = outer_G(prob, r, trial, seedp);
        } catch (const std::runtime_error&) {
          continue;  // guard or inner failure: shorten the step
        }
        const double nxtn = norm2(d, nxt.G);
        if (nxtn < curn || nxtn <= prob.opts.outer_tol) {
          for (int i = 0; i < d; ++i) out.tau[i] = trial[i];
          cur = std::move(nxt);
          curn = nxtn;
          adopt(cur);
          accepted = true;
          break;
        }
        // Give the frozen Jacobian one full step only; refresh before
        // spending effort on backtracking.
        if (attempt == 0) break;
      }
      if (!accepted && attempt == 0) {
        const double h = 1e-5;
        for (int l = 0; l < d; ++l) {
          double tp[3], tm[3];
          for (int i = 0; i < d; ++i) tp[i] = tm[i] = out.tau[i];
          tp[l] += h;
          tm[l] -= h;
          OuterResult gp = outer_G(prob, r, tp, seedp);
          OuterResult gmr = outer_G(prob, r, tm, seedp);
          for (int i = 0; i < d; ++i)
            J[i * d + l] = (gp.G[i] - gmr.G[i]) / (2.0 * h);
          adopt(gmr);
        }
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "outer Newton stalled: no descent from |G| = " << curn
         << " (r = " << r << ")";
      throw std::runtime_error(os.str());
    }
  }
}

namespace {

// Degree from ordered images along a counterclockwise loop (d = 2): the
// accumulated atan2 increments divided by 2 pi.
double loop_winding(const std::vector<std::array<double, 2>>& w) {
  double total = 0.0;
  const int M = (int)w.size();
  for (int k = 0; k < M; ++k) {
    const auto& a = w[k];
    const auto& b = w[(k + 1) % M];
    total += std::atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]);
  }
  return total / (2.0 * kPi);
}

struct IcoSphere {
  std::vector<std::array<double, 3>> verts;
  std::vector<std::array<int, 3>> faces;  // outward oriented
};

IcoSphere icosphere(int subdiv) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  IcoSphere ico;
  ico.verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : ico.verts) {
    const double nn = norm2(3, v.data());
    for (double& c : v) c /= nn;
  }
  ico.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& f : ico.faces) {
    double x[3];
    smallmat::cross3(ico.verts[f[0]].data(), ico.verts[f[1]].data(), x);
    double dot = 0.0;
    for (int i = 0; i < 3; ++i) dot += x[i] * ico.verts[f[2]][i];
    if (dot < 0.0) std::swap(f[1], f[2]);
  }
  for (int s = 0; s < subdiv; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const std::pair<int, int> key(std::min(a, b), std::max(a, b));
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      std::array<double, 3> m;
      for (int i = 0; i < 3; ++i) m[i] = ico.verts[a][i] + ico.verts[b][i];
      const double nn = norm2(3, m.data());
      for (double& c : m) c /= nn;
      ico.verts.push_back(m);
      const int idx = (int)ico.verts.size() - 1;
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(ico.faces.size() * 4);
    for (const auto& f : ico.faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    ico.faces = std::move(next);
  }
  return ico;
}

// Signed solid angle subtended by the spherical triangle of three unit
// vectors (van Oosterom/Strackee), divided out by 4 pi at the caller.
double solid_angle(const double* a, const double* b, const double* c) {
  double x[3];
  smallmat::cross3(b, c, x);
  double num = 0.0, ab = 0.0, bc = 0.0, ca = 0.0;
  for (int i = 0; i < 3; ++i) {
    num += a[i] * x[i];
    ab += a[i] * b[i];
    bc += b[i] * c[i];
    ca += c[i] * a[i];
  }
  return 2.0 * std::atan2(num, 1.0 + ab + bc + ca);
}

double sphere_images_winding(const IcoSphere& ico,
                             const std::vector<std::array<double, 3>>& w) {
  double total = 0.0;
  for (const auto& f : ico.faces)
    total += solid_angle(w[f[0]].data(), w[f[1]].data(), w[f[2]].data());
  return total / (4.0 * kPi);
}

DegreeReport round_winding(double wnum, double rho, int samples,
                           double min_norm) {
  DegreeReport rep;
  rep.rho = rho;
  rep.boundary_samples = samples;
  rep.degree = (int)std::lround(wnum);
  rep.residue = std::abs(wnum - rep.degree);
  rep.min_boundary_norm = min_norm;
  rep.homotopy_ok = true;
  // Inverted comparison so a NaN winding (overflow in the increments)
  // fails too.
  if (!(rep.residue < 0.2))
    throw std::runtime_error("winding residue " + fmt_g(rep.residue) +
                             " exceeds 0.2: boundary sampling too coarse");
  return rep;
}

[[noreturn]] void throw_boundary_zero(double minn) {
  throw std::runtime_error(
      "vector field vanishes on the degree boundary (min norm " +
      fmt_g(minn) + ")");
}

} // namespace

DegreeReport brouwer_degree(int dim, const VecField& field,
                            const double* center, double rho) {
  if (!(rho > 0.0))
    throw std::invalid_argument("degree radius must be positive");

  if (dim == 2) {
    const int M = 4096;
    std::vector<std::array<double, 2>> w(M);
    double minn = HUGE_VAL;
    for (int k = 0; k < M; ++k) {
      const double th = 2.0 * kPi * k / M;
      const double tau[2] = {center[0] + rho * std::cos(th),
                             center[1] + rho * std::sin(th)};
      double out[2];
      field(tau, out);
      w[k] = {out[0], out[1]};
      minn = std::min(minn, norm2(2, out));
    }
    if (!(minn > 1e-8)) throw_boundary_zero(minn);
    return round_winding(loop_winding(w), rho, M, minn);
  }

  if (dim != 3)
    throw std::invalid_argument("degree dimension must be 2 or 3");
  const IcoSphere ico = icosphere(5);
  const int M = (int)ico.verts.size();
  std::vector<std::array<double, 3>> w(M);
  double minn = HUGE_VAL;
  for (int k = 0; k < M; ++k) {
    double tau[3], out[3];
    for (int i = 0; i < 3; ++i) tau[i] = center[i] + rho * ico.verts[k][i];
    field(tau, out);
    w[k] = {out[0], out[1], out[2]};
    minn = std::min(minn, norm2(3, out));
  }
  if (!(minn > 1e-8)) throw_boundary_zero(minn);
  for (auto& v : w) {
    const double nn = norm2(3, v.data());
    for (double& c : v) c /= nn;
  }
  return round_winding(sphere_images_winding(ico, w), rho, M, minn);
}

namespace {

// Normal-coordinate data of the limit outer field at one tau: D is the
// gradient of f(c(tau)) in the tau chart, v0 = B D = E grad f is the
// outer field up to the factor -n/f(p), and v1 = g^{-1} D represents
// grad^g f. The homotopy between them is the segment (1-s) v0 + s v1.
struct TauFields {
  double D[3] = {};
  double v0[3] = {};
  double v1[3] = {};
};

TauFields tau_fields(const Problem& prob, const double* tau) {
  const int d = prob.dim();
  const MetricChart& chart = prob.chart();

  double w[3] = {};
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < d; ++i) w[a] += tau[i] * prob.frame().e[i * d + a];

  const JacobiEnd je = exp_with_jacobi(chart, prob.p(), w, prob.frame().e);
  const TransportEnd te =
      parallel_transport(chart, prob.p(), w, prob.frame().e, d);
  const Jet3 jet = prob.f().eval_jet(je.x, 1);

  TauFields out;
  for (int j = 0; j < d; ++j) {
    double s = 0.0, s0 = 0.0;
    for (int a = 0; a < d; ++a) {
      s += je.J[j * d + a] * jet.grad[a];
      s0 += te.vecs[j * d + a] * jet.grad[a];
    }
    out.D[j] = s;
    out.v0[j] = s0;
  }

  double gx[9], gt[9], gtinv[9];
  chart.metric(je.x, gx);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          s += gx[a * d + b] * je.J[i * d + a] * je.J[j * d + b];
      gt[i * d + j] = s;
    }
  if (!smallmat::invert(d, gt, gtinv))
    throw std::runtime_error("pullback metric is singular in the tau chart");
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += gtinv[i * d + j] * out.D[j];
    out.v1[i] = s;
  }
  return out;
}

void check_homotopy_segment(int d, const TauFields& tf, const double* tau) {
  for (int m = 0; m <= 16; ++m) {
    const double s = m / 16.0;
    double w[3];
    for (int i = 0; i < d; ++i)
      w[i] = (1.0 - s) * tf.v0[i] + s * tf.v1[i];
    if (!(norm2(d, w) > 1e-8)) {
      std::ostringstream os;
      os << "homotopy to the gradient field vanishes at s = " << s
         << ", tau = " << fmt_tau(d, tau);
      throw std::runtime_error(os.str());
    }
  }
}

[[noreturn]] void throw_not_isolated(int d, const double* tau, double dn) {
  std::ostringstream os;
  os << "no isolated zero: |D f| = " << dn << " at tau = " << fmt_tau(d, tau)
     << " on the degree boundary";
  throw std::runtime_error(os.str());
}

} // namespace

DegreeReport index_gradient(const Problem& prob, double rho) {
  const int d = prob.dim();
  if (!(rho > 0.0))
    throw std::invalid_argument("degree radius must be positive");

  const double d0 = norm2(d, prob.grad_p());
  if (!(d0 <= 1e-8))
    throw std::runtime_error(
        "no isolated zero: the base point is not a critical point of f "
        "(|D f| = " + fmt_g(d0) + ")");

  if (d == 2) {
    const int M = 4096;
    std::vector<std::array<double, 2>> w(M);
    double minn = HUGE_VAL;
    for (int k = 0; k < M; ++k) {
      const double th = 2.0 * kPi * k / M;
      const double tau[2] = {rho * std::cos(th), rho * std::sin(th)};
      const TauFields tf = tau_fields(prob, tau);
      const double dn = norm2(2, tf.D);
      if (!(dn > 1e-8)) throw_not_isolated(2, tau, dn);
      check_homotopy_segment(2, tf, tau);
      w[k] = {tf.v1[0], tf.v1[1]};
      minn = std::min(minn, norm2(2, tf.v1));
    }
    if (!(minn > 1e-8)) throw_boundary_zero(minn);
    return round_winding(loop_winding(w), rho, M, minn);
  }

  const IcoSphere ico = icosphere(5);
  const int M = (int)ico.verts.size();
  std::vector<std::array<double, 3>> w(M);
  double minn = HUGE_VAL;
  for (int k = 0; k < M; ++k) {
    double tau[3];
    for (int i = 0; i < 3; ++i) tau[i] = rho * ico.verts[k][i];
    const TauFields tf = tau_fields(prob, tau);
    const double dn = norm2(3, tf.D);
    if (!(dn > 1e-8)) throw_not_isolated(3, tau, dn);
    check_homotopy_segment(3, tf, tau);
    w[k] = {tf.v1[0], tf.v1[1], tf.v1[2]};
    minn = std::min(minn, norm2(3, tf.v1));
  }
  if (!(minn > 1e-8)) throw_boundary_zero(minn);
  for (auto& v : w) {
    const double nn = norm2(3, v.data());
    for (double& c : v) c /= nn;
  }
  return round_winding(sphere_images_winding(ico, w), rho, M, minn);
}

namespace {

struct CellDegree {
  bool boundary_clear = false;
  int degree = 0;
  double residue = 0.0;
  double min_norm = 0.0;
};

// Winding over a square cell boundary (d = 2), counterclockwise with m
// samples per edge; boundary_clear goes false when the field comes within
// 1e-8 of zero there.
CellDegree square_winding(const VecField& field, const double* c, double half,
                          int m) {
  CellDegree out;
  const int M = 4 * m;
  std::vector<std::array<double, 2>> w(M);
  double minn = HUGE_VAL;
  for (int k = 0; k < M; ++k) {
    const int edge = k / m;
    const double t = 2.0 * half * (k % m) / m;
    double tau[2];
    switch (edge) {
      case 0: tau[0] = c[0] - half + t; tau[1] = c[1] - half; break;
      case 1: tau[0] = c[0] + half; tau[1] = c[1] - half + t; break;
      case 2: tau[0] = c[0] + half - t; tau[1] = c[1] + half; break;
      default: tau[0] = c[0] - half; tau[1] = c[1] + half - t; break;
    }
    double g[2];
    field(tau, g);
    w[k] = {g[0], g[1]};
    minn = std::min(minn, norm2(2, g));
  }
  out.min_norm = minn;
  if (!(minn > 1e-8)) return out;
  out.boundary_clear = true;
  const double wnum = loop_winding(w);
  out.degree = (int)std::lround(wnum);
  out.residue = std::abs(wnum - out.degree);
  return out;
}

// Solid-angle sum over a cube cell surface (d = 3): each face carries a
// k x k quad grid split into outward-oriented triangles.
CellDegree cube_winding(const VecField& field, const double* c, double half,
                        int k) {
  CellDegree out;
  // face = (normal axis, sign, tangent axes); t1 x t2 points outward
  static const int kFaces[6][4] = {{0, +1, 1, 2}, {0, -1, 2, 1},
                                   {1, +1, 2, 0}, {1, -1, 0, 2},
                                   {2, +1, 0, 1}, {2, -1, 1, 0}};
  double total = 0.0;
  double minn = HUGE_VAL;
  std::vector<std::array<double, 3>> w((k + 1) * (k + 1));
  for (const auto& fc : kFaces) {
    const int na = fc[0], sg = fc[1], t1 = fc[2], t2 = fc[3];
    for (int i = 0; i <= k; ++i)
      for (int j = 0; j <= k; ++j) {
        double tau[3] = {c[0], c[1], c[2]};
        tau[na] += sg * half;
        tau[t1] += -half + 2.0 * half * i / k;
        tau[t2] += -half + 2.0 * half * j / k;
        double g[3];
        field(tau, g);
        const double nn = norm2(3, g);
        minn = std::min(minn, nn);
        if (nn > 0.0)
          w[i * (k + 1) + j] = {g[0] / nn, g[1] / nn, g[2] / nn};
        else
          w[i * (k + 1) + j] = {0.0, 0.0, 0.0};
      }
    if (!(minn > 1e-8)) {
      out.min_norm = minn;
      return out;
    }
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const auto& p00 = w[i * (k + 1) + j];
        const auto& p10 = w[(i + 1) * (k + 1) + j];
        const auto& p11 = w[(i + 1) * (k + 1) + j + 1];
        const auto& p01 = w[i * (k + 1) + j + 1];
        total += solid_angle(p00.data(), p10.data(), p11.data());
        total += solid_angle(p00.data(), p11.data(), p01.data());
      }
  }
  out.min_norm = minn;
  out.boundary_clear = true;
  const double wnum = total / (4.0 * kPi);
  out.degree = (int)std::lround(wnum);
  out.residue = std::abs(wnum - out.degree);
  return out;
}

// Cell degree with adaptive boundary refinement until the residue settles.
CellDegree cell_degree(int d, const VecField& field, const double* c,
                       double half) {
  const int cap = d == 2 ? 1024 : 32;
  CellDegree out;
  for (int m = 8; m <= cap; m *= 2) {
    out = d == 2 ? square_winding(field, c, half, m)
                 : cube_winding(field, c, half, m);
    if (!out.boundary_clear) return out;
    if (out.residue < 0.2) return out;
  }
  throw std::runtime_error("cell winding failed to resolve: residue " +
                           fmt_g(out.residue) + " at the sampling cap");
}

} // namespace

DegenResult degenerate_solve(const Problem& prob, double r, double rho) {
  const int d = prob.dim();
  if (!(r > 0.0))
    throw std::invalid_argument("degenerate solve needs r > 0");

  const DegreeReport idx = index_gradient(prob, rho);
  if (idx.degree == 0)
    throw std::runtime_error(
        "degree zero at the top level: the gradient field has index 0 on "
        "this ball");

  DegenResult out;
  std::vector<double> seed;
  const VecField field = [&](const double* tau, double* g) {
    ++out.field_evals;
    OuterResult og =
        outer_G(prob, r, tau, seed.empty() ? nullptr : &seed);
    seed = og.inner.u;
    for (int i = 0; i < d; ++i) g[i] = og.G[i];
  };

  // Admissibility of shrinking r: G(s r, .) must stay away from zero on
  // the ball boundary all the way down to the limit field.
  {
    const auto dirs = fixed_directions(d, 64);
    for (const auto& dir : dirs) {
      double tau[3];
      for (int i = 0; i < d; ++i) tau[i] = rho * dir[i];
      for (int si = 0; si <= 4; ++si) {
        const double s = si / 4.0;
        double g[3];
        if (si == 0) {
          OuterResult og = outer_G(prob, 0.0, tau);
          for (int i = 0; i < d; ++i) g[i] = og.G[i];
        } else {
          OuterResult og =
              outer_G(prob, s * r, tau, seed.empty() ? nullptr : &seed);
          seed = og.inner.u;
          for (int i = 0; i < d; ++i) g[i] = og.G[i];
        }
        if (!(norm2(d, g) > 1e-8)) {
          std::ostringstream os;
          os << "homotopy in r vanishes on the ball boundary at s = " << s
             << ", tau = " << fmt_tau(d, tau)
             << ": the degree of G(r, .) is not certified";
          throw std::runtime_error(os.str());
        }
      }
    }
  }

  // Top cell: the square/cube inscribed in the ball, backed off by 1%.
  double center[3] = {0.0, 0.0, 0.0};
  double half = 0.99 * rho / std::sqrt((double)d);
  CellDegree top;
  for (int t = 0; t < 8; ++t) {
    top = cell_degree(d, field, center, half);
    if (top.boundary_clear) break;
    half *= 0.99;
  }
  if (!top.boundary_clear)
    throw std::runtime_error(
        "the outer field vanishes on the top cell boundary even after "
        "shrinking");
  if (top.degree == 0)
    throw std::runtime_error(
        "degree zero at the top level: G(r, .) has winding 0 over the "
        "inscribed cell");
  out.top_degree = top.degree;

  const char* kAllZero =
      "all subcells report degree zero: boundary sampling failed to "
      "localize the zero of G";
  int stuck = 0;
  for (;;) {
    double g[3];
    field(center, g);
    if (norm2(d, g) <= prob.opts.leaf_tol) break;
    if (2.0 * half * std::sqrt((double)d) < 1e-9) {
      std::ostringstream os;
      os << "subdivision reached diameter 1e-9 with |G| = " << norm2(d, g)
         << " still above the leaf gate";
      throw std::runtime_error(os.str());
    }
    bool picked = false;
    for (int child = 0; child < (1 << d) && !picked; ++child) {
      double cc[3] = {center[0], center[1], center[2]};
      const double ch = half / 2.0;
      for (int i = 0; i < d; ++i) cc[i] += ((child >> i) & 1) ? ch : -ch;
      double chh = ch;
      CellDegree cd;
      for (int t = 0; t < 8; ++t) {
        cd = cell_degree(d, field, cc, chh);
        if (cd.boundary_clear) break;
        chh *= 0.99;  // documented tie-break for zeros on a cell boundary
      }
      if (!cd.boundary_clear || cd.degree == 0) continue;
      for (int i = 0; i < d; ++i) center[i] = cc[i];
      half = chh;
      ++out.depth;
      picked = true;
    }
    if (picked) {
      stuck = 0;
      continue;
    }

    // Every child came back with degree zero. That happens when the zero
    // sits on a dyadic plane of the current frame (symmetric problems put
    // it there exactly): the winding splits between the children touching
    // the plane. Offset the frame by a third of a cell so the planes move
    // off the zero and never re-align with it, and rescan.
    if (++stuck > 3) throw std::runtime_error(kAllZero);
    bool reframed = false;
    for (int sb = 0; sb < (1 << d) && !reframed; ++sb) {
      double nc[3] = {center[0], center[1], center[2]};
      for (int i = 0; i < d; ++i)
        nc[i] += (((sb >> i) & 1) ? -1.0 : 1.0) * half / 3.0;
      // Keep the shifted cell inside the certified inscribed cube.
      double room = rho / std::sqrt((double)d);
      for (int i = 0; i < d; ++i)
        room = std::min(room, rho / std::sqrt((double)d) - std::abs(nc[i]));
      double nh = std::min(half, 0.99 * room);
      if (!(nh > 0.0)) continue;
      CellDegree fr;
      for (int t = 0; t < 8; ++t) {
        fr = cell_degree(d, field, nc, nh);
        if (fr.boundary_clear) break;
        nh *= 0.99;
      }
      if (!fr.boundary_clear || fr.degree == 0) continue;
      for (int i = 0; i < d; ++i) center[i] = nc[i];
      half = nh;
      reframed = true;
    }
    if (!reframed) throw std::runtime_error(kAllZero);
  }

  for (int i = 0; i < d; ++i) out.tau[i] = center[i];
  OuterResult fin =
      outer_G(prob, r, out.tau, seed.empty() ? nullptr : &seed);
  out.Gnorm = norm2(d, fin.G);
  out.inner = std::move(fin.inner);
  return out;
}

BuildResult build_family(const Problem& prob,
                         const std::vector<double>& r_grid, SolveMode mode) {
  if (r_grid.empty())
    throw std::invalid_argument("family radius grid is empty");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0))
      throw std::invalid_argument("family radii must be positive");
    if (i > 0 && !(r_grid[i] > r_grid[i - 1]))
      throw std::invalid_argument("family radii must be strictly ascending");
  }

  BuildResult out;
  out.leaves.reserve(r_grid.size());
  std::vector<double> useed = solve_u0(prob);
  double tau[3] = {};
  for (std::size_t k = 0; k < r_grid.size(); ++k) {
    FamilyLeaf leaf;
    leaf.r = r_grid[k];
    try {
      if (mode == SolveMode::nondegenerate) {
        NewtonResult nr = newton_tau(prob, leaf.r, tau, &useed);
        for (int i = 0; i < prob.dim(); ++i) leaf.tau_bar[i] = nr.tau[i];
        leaf.residual_sup = nr.inner.residual_unscaled;
        leaf.inner_iters = nr.inner.iters;
        leaf.outer_iters = nr.iters;
        leaf.u = std::move(nr.inner.u);
      } else {
        DegenResult dr = degenerate_solve(prob, leaf.r, prob.opts.rho);
        for (int i = 0; i < prob.dim(); ++i) leaf.tau_bar[i] = dr.tau[i];
        leaf.residual_sup = dr.inner.residual_unscaled;
        leaf.inner_iters = dr.inner.iters;
        leaf.outer_iters = dr.depth;
        leaf.u = std::move(dr.inner.u);
      }
    } catch (const std::exception& e) {
      out.fail_index = (int)k;
      std::ostringstream os;
      os << "leaf " << k << " (r = " << leaf.r << "): " << e.what();
      out.fail_message = os.str();
      return out;
    }
    if (leaf.residual_sup > prob.opts.leaf_tol) {
      out.fail_index = (int)k;
      std::ostringstream os;
      os << "leaf " << k << " (r = " << leaf.r
         << "): certificate residual " << leaf.residual_sup
         << " exceeds the leaf gate " << prob.opts.leaf_tol;
      out.fail_message = os.str();
      return out;
    }
    for (int i = 0; i < prob.dim(); ++i) tau[i] = leaf.tau_bar[i];
    useed = leaf.u;
    out.leaves.push_back(std::move(leaf));
  }
  out.complete = true;
  return out;
}

FoliationReport foliation_check(const Problem& prob,
                                const std::vector<FamilyLeaf>& leaves) {
  FoliationReport rep;
  const int d = prob.dim();

  rep.enough_leaves = leaves.size() >= 4;
  if (!rep.enough_leaves) return rep;

  std::vector<double> lx, ly;
  for (const FamilyLeaf& leaf : leaves) {
    const double tn = norm2(d, leaf.tau_bar);
    if (tn > 1e-12) {
      lx.push_back(std::log(leaf.r));
      ly.push_back(std::log(tn));
    }
  }
  if (lx.size() < 2) {
    rep.tau_slope_skipped = true;
  } else {
    rep.tau_slope = lsq_slope(lx, ly);
    rep.tau_slope_ok = rep.tau_slope >= 1.9;
  }

  // Chart-coordinate samples of every leaf at the grid nodes.
  const SphereGrid& grid = prob.grid();
  const int nn = grid.num_nodes();
  RescaledMetric gm(prob.chart(), prob.p(), prob.frame());
  std::vector<std::vector<std::array<double, 3>>> pts(leaves.size());
  std::vector<double> unodes(nn);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const FamilyLeaf& leaf = leaves[k];
    gm.set_leaf(leaf.r, leaf.tau_bar);
    grid.synthesize(leaf.u.data(), unodes.data());
    const Frame& E = gm.frame();
    pts[k].resize(nn);
    for (int q = 0; q < nn; ++q) {
      double om[3];
      grid.node_omega(q, om);
      const double rr = leaf.r * (1.0 - leaf.r * leaf.r * unodes[q]);
      double v[3] = {};
      for (int a = 0; a < d; ++a)
        for (int i = 0; i < d; ++i) v[a] += rr * om[i] * E.e[i * d + a];
      const GeodesicEnd ge = exp_map(prob.chart(), gm.center(), v);
      pts[k][q] = {ge.x[0], ge.x[1], ge.x[2]};
    }
  }

  rep.min_gap = HUGE_VAL;
  for (std::size_t k = 0; k + 1 < leaves.size(); ++k)
    for (int a = 0; a < nn; ++a)
      for (int b = 0; b < nn; ++b) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
          const double dd = pts[k][a][i] - pts[k + 1][b][i];
          s += dd * dd;
        }
        rep.min_gap = std::min(rep.min_gap, std::sqrt(s));
      }
  rep.disjoint_ok = rep.min_gap > 0.0;

  rep.directions = 64;
  const auto dirs = fixed_directions(d, rep.directions);
  rep.monotone_ok = true;
  std::vector<double> hprev(rep.directions, 0.0);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    for (int j = 0; j < rep.directions; ++j) {
      double h = -HUGE_VAL;
      for (int q = 0; q < nn; ++q) {
        double s = 0.0;
        for (int i = 0; i < d; ++i)
          s += (pts[k][q][i] - prob.p()[i]) * dirs[j][i];
        h = std::max(h, s);
      }
      if (k > 0 && !(h > hprev[j])) rep.monotone_ok = false;
      hprev[j] = h;
    }
  }
  return rep;
}

UniquenessReport uniqueness_probe(const Problem& prob, double r, int n_seeds,
                                  double noise_sup) {
  if (n_seeds < 3)
    throw std::invalid_argument("uniqueness probe needs at least 3 seeds");
  if (!(r > 0.0))
    throw std::invalid_argument("uniqueness probe needs r > 0");

  const SphereGrid& grid = prob.grid();
  const int d = prob.dim();
  const int nc = grid.num_coeffs();
  const int nn = grid.num_nodes();

  const std::vector<double> u0 = solve_u0(prob);
  std::vector<double> u0n(nn);
  grid.synthesize(u0.data(), u0n.data());
  const double amp =
      noise_sup >= 0.0 ? noise_sup : 0.3 * std::pow(r, 1.5) * sup_abs(u0n);

  UniquenessReport rep;
  rep.attempted = n_seeds;
  std::vector<std::array<double, 3>> taus;
  std::vector<std::vector<double>> us;

  for (int sdx = 0; sdx < n_seeds; ++sdx) {
    std::mt19937_64 rng(0x5eedf00dULL + 1000ULL * (unsigned)sdx);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    // Band-limited noise away from the kernel, normalized in sup norm.
    std::vector<double> noise(nc, 0.0);
    for (int k = 0; k < nc; ++k) {
      const double a = unif(rng);
      if (grid.deg(k) != 1 && grid.deg(k) <= 6) noise[k] = a;
    }
    std::vector<double> nnodes(nn);
    grid.synthesize(noise.data(), nnodes.data());
    const double ns = sup_abs(nnodes);

    std::vector<double> useed = u0;
    if (ns > 0.0 && amp > 0.0)
      for (int k = 0; k < nc; ++k) useed[k] += noise[k] * (amp / ns);

    double tau0[3] = {};
    const double trad = 0.5 * prob.opts.rho;
    for (;;) {
      double v[3] = {};
      for (int i = 0; i < d; ++i) v[i] = unif(rng);
      if (norm2(d, v) <= 1.0) {
        for (int i = 0; i < d; ++i) tau0[i] = trad * v[i];
        break;
      }
    }

    try {
      NewtonResult nr = newton_tau(prob, r, tau0, &useed);
      taus.push_back({nr.tau[0], nr.tau[1], nr.tau[2]});
      us.push_back(std::move(nr.inner.u));
      ++rep.converged;
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "seed " << sdx << ": " << e.what();
      rep.failures.push_back(os.str());
    }
  }

  if (rep.converged < 2) {
    std::string msg = "uniqueness probe: fewer than two seeds converged";
    if (!rep.failures.empty()) msg += "; first failure: " + rep.failures[0];
    throw std::runtime_error(msg);
  }

  std::vector<double> ua(nn), ub(nn);
  for (std::size_t a = 0; a < us.size(); ++a)
    for (std::size_t b = a + 1; b < us.size(); ++b) {
      double dt = 0.0;
      for (int i = 0; i < d; ++i) {
        const double dd = taus[a][i] - taus[b][i];
        dt += dd * dd;
      }
      rep.tau_spread = std::max(rep.tau_spread, std::sqrt(dt));
      grid.synthesize(us[a].data(), ua.data());
      grid.synthesize(us[b].data(), ub.data());
      double du = 0.0;
      for (int q = 0; q < nn; ++q)
        du = std::max(du, std::abs(ua[q] - ub[q]));
      rep.u_spread = std::max(rep.u_spread, du);
    }
  rep.ok = rep.tau_spread <= 1e-8 && rep.u_spread <= 1e-8;
  return rep;
}

} // namespace pmc
