#include "pmc/meancurv.hpp"

#include "pmc/smallmat.hpp"

#include <cmath>
#include <stdexcept>

namespace pmc {

namespace {

// Sphere point and its angle derivatives in Cartesian components.
// a-indices: 0 = theta, 1 = phi.
struct SpherePt {
  double x[3];
  double xa[2][3];
  double xab[2][2][3];
};

SpherePt sphere_point(int n, double th, double ph) {
  SpherePt s{};
  if (n == 1) {
    double c = std::cos(th), sn = std::sin(th);
    s.x[0] = c;
    s.x[1] = sn;
    s.xa[0][0] = -sn;
    s.xa[0][1] = c;
    s.xab[0][0][0] = -c;
    s.xab[0][0][1] = -sn;
  } else {
    double st = std::sin(th), ct = std::cos(th);
    double sp = std::sin(ph), cp = std::cos(ph);
    s.x[0] = st * cp;
    s.x[1] = st * sp;
    s.x[2] = ct;
    s.xa[0][0] = ct * cp;
    s.xa[0][1] = ct * sp;
    s.xa[0][2] = -st;
    s.xa[1][0] = -st * sp;
    s.xa[1][1] = st * cp;
    s.xa[1][2] = 0.0;
    // d^2/dth^2 = -x
    s.xab[0][0][0] = -st * cp;
    s.xab[0][0][1] = -st * sp;
    s.xab[0][0][2] = -ct;
    s.xab[0][1][0] = -ct * sp;
    s.xab[0][1][1] = ct * cp;
    s.xab[0][1][2] = 0.0;
    s.xab[1][0][0] = s.xab[0][1][0];
    s.xab[1][0][1] = s.xab[0][1][1];
    s.xab[1][0][2] = 0.0;
    s.xab[1][1][0] = -st * cp;
    s.xab[1][1][1] = -st * sp;
    s.xab[1][1][2] = 0.0;
  }
  return s;
}

// Graph field w = r^2 u and its angle derivatives at every node.
struct GraphField {
  std::vector<double> w, wth, wph, wthth, wthph, wphph;
};

GraphField graph_field(const RescaledMetric& gm, const SphereGrid& grid,
                       const double* u_coeffs) {
  const int nn = grid.num_nodes();
  const double r2 = gm.r() * gm.r();
  GraphField gf;
  gf.w.resize(nn);
  gf.wth.resize(nn);
  gf.wthth.resize(nn);
  grid.synthesize(u_coeffs, gf.w.data());
  grid.synth_dth(u_coeffs, gf.wth.data());
  grid.synth_dthth(u_coeffs, gf.wthth.data());
  if (grid.n() == 2) {
    gf.wph.resize(nn);
    gf.wthph.resize(nn);
    gf.wphph.resize(nn);
    grid.synth_dph(u_coeffs, gf.wph.data());
    grid.synth_dthph(u_coeffs, gf.wthph.data());
    grid.synth_dphph(u_coeffs, gf.wphph.data());
  }

  // Tubular-neighborhood guard on u before the r^2 scaling.
  double usup = 0.0, gsup = 0.0;
  for (int i = 0; i < nn; ++i) {
    usup = std::max(usup, std::abs(gf.w[i]));
    double g2 = gf.wth[i] * gf.wth[i];
    if (grid.n() == 2) {
      double s = std::sin(grid.theta(i));
      g2 += gf.wph[i] * gf.wph[i] / (s * s);
    }
    gsup = std::max(gsup, std::sqrt(g2));
  }
  if (r2 * (usup + gsup) >= 0.1)
    throw std::runtime_error(
        "graph sphere leaves the tubular neighborhood: r^2 (|u| + |grad u|) "
        "exceeds 0.1");

  auto scale = [&](std::vector<double>& v) {
    for (double& t : v) t *= r2;
  };
  scale(gf.w);
  scale(gf.wth);
  scale(gf.wthth);
  scale(gf.wph);
  scale(gf.wthph);
  scale(gf.wphph);
  return gf;
}

} // namespace

std::vector<double> mean_curvature(const RescaledMetric& gm,
                                   const SphereGrid& grid,
                                   const double* u_coeffs) {
  const int n = grid.n();
  const int d = n + 1;
  if (gm.dim() != d)
    throw std::invalid_argument("grid and metric dimension mismatch");
  const int nn = grid.num_nodes();
  GraphField gf = graph_field(gm, grid, u_coeffs);

  std::vector<double> H(nn);
  for (int i = 0; i < nn; ++i) {
    SpherePt sp = sphere_point(n, grid.theta(i), grid.phi(i));
    double rho = 1.0 - gf.w[i];
    double rho_a[2] = {-gf.wth[i], n == 2 ? -gf.wph[i] : 0.0};
    double rho_ab[2][2] = {
        {-gf.wthth[i], n == 2 ? -gf.wthph[i] : 0.0},
        {n == 2 ? -gf.wthph[i] : 0.0, n == 2 ? -gf.wphph[i] : 0.0}};

    // Phi = rho x and its angle derivatives.
    double Phi[3], Phia[2][3], Phiab[2][2][3];
    for (int c = 0; c < d; ++c) Phi[c] = rho * sp.x[c];
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < d; ++c)
        Phia[a][c] = rho_a[a] * sp.x[c] + rho * sp.xa[a][c];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < d; ++c)
          Phiab[a][b][c] = rho_ab[a][b] * sp.x[c] + rho_a[a] * sp.xa[b][c] +
                           rho_a[b] * sp.xa[a][c] + rho * sp.xab[a][b][c];

    // Ambient metric and Christoffel symbols of gbar at the surface point.
    double g[9], dg[27], ginv[9];
    gm.gbar_d(Phi, g, dg);
    if (!smallmat::invert(d, g, ginv))
      throw std::runtime_error("rescaled metric singular on the leaf");
    double Gam[27];
    for (int k = 0; k < d; ++k)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          double s = 0.0;
          for (int l = 0; l < d; ++l)
            s += ginv[k * d + l] *
                 (dg[a * d * d + b * d + l] + dg[b * d * d + a * d + l] -
                  dg[l * d * d + a * d + b]);
          Gam[(k * d + a) * d + b] = 0.5 * s;
        }

    // First fundamental form and the metric covectors of the tangents.
    double I[4], wcov[2][3];
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int e = 0; e < d; ++e) s += g[c * d + e] * Phia[a][e];
        wcov[a][c] = s;
      }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += wcov[a][c] * Phia[b][c];
        I[a * n + b] = s;
      }
    double Iinv[4];
    if (!smallmat::invert(n, I, Iinv))
      throw std::runtime_error("degenerate first fundamental form");

    // Unit normal: Euclidean-orthogonal to the tangent covectors, then
    // normalized in gbar and oriented inward.
    double N[3];
    if (d == 2) {
      N[0] = -wcov[0][1];
      N[1] = wcov[0][0];
    } else {
      smallmat::cross3(wcov[0], wcov[1], N);
    }
    double nn2 = 0.0, ndotc = 0.0;
    for (int c = 0; c < d; ++c)
      for (int e = 0; e < d; ++e) nn2 += g[c * d + e] * N[c] * N[e];
    nn2 = std::sqrt(nn2);
    for (int c = 0; c < d; ++c) N[c] /= nn2;
    for (int c = 0; c < d; ++c)
      for (int e = 0; e < d; ++e) ndotc += g[c * d + e] * N[c] * Phi[e];
    if (ndotc > 0.0)
      for (int c = 0; c < d; ++c) N[c] = -N[c];

    // Second fundamental form and the trace.
    double Hval = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double acc[3];
        for (int c = 0; c < d; ++c) {
          double s = Phiab[a][b][c];
          for (int e = 0; e < d; ++e)
            for (int f2 = 0; f2 < d; ++f2)
              s += Gam[(c * d + e) * d + f2] * Phia[a][e] * Phia[b][f2];
          acc[c] = s;
        }
        double II = 0.0;
        for (int c = 0; c < d; ++c)
          for (int e = 0; e < d; ++e) II += g[c * d + e] * N[c] * acc[e];
        Hval += Iinv[a * n + b] * II;
      }
    H[i] = Hval;
  }
  return H;
}

std::vector<double> f_restriction(const RescaledMetric& gm,
                                  const SphereGrid& grid, const Expr& f,
                                  const double* u_coeffs) {
  const int n = grid.n();
  const int d = n + 1;
  if (gm.dim() != d || f.dim() != d)
    throw std::invalid_argument("grid, metric and f dimension mismatch");
  const int nn = grid.num_nodes();
  const double r = gm.r();
  std::vector<double> rho(nn);
  grid.synthesize(u_coeffs, rho.data());
  for (int i = 0; i < nn; ++i) rho[i] = 1.0 - r * r * rho[i];

  const Frame& fr = gm.frame();
  std::vector<double> F(nn);
  for (int i = 0; i < nn; ++i) {
    SpherePt sp = sphere_point(n, grid.theta(i), grid.phi(i));
    double v[3] = {0, 0, 0};
    for (int k = 0; k < d; ++k)
      for (int a = 0; a < d; ++a)
        v[a] += r * rho[i] * sp.x[k] * fr.e[k * d + a];
    GeodesicEnd end = exp_map(gm.chart(), gm.center(), v);
    F[i] = f.eval(end.x);
  }
  return F;
}

FrameDerivs covariant_frame_derivs(const RescaledMetric& gm, const Expr& f,
                                   int order) {
  const int d = gm.dim();
  if (f.dim() != d) throw std::invalid_argument("f dimension mismatch");
  FrameDerivs out;
  out.dim = d;
  const double* c = gm.center();
  const Frame& fr = gm.frame();
  Jet3 j = f.eval_jet(c, order);
  out.fval = j.value;
  if (order < 1) return out;

  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += j.grad[a] * fr.e[i * d + a];
    out.grad[i] = s;
  }
  if (order < 2) return out;

  double Gam[27], dGam[81];
  if (order >= 3) {
    gm.chart().christoffel_d(c, Gam, dGam);
  } else {
    gm.chart().christoffel(c, Gam);
  }

  // Hess_ab = f_ab - Gamma^e_ab f_e
  double Hc[9];
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      double s = j.hess[a][b];
      for (int e = 0; e < d; ++e) s -= Gam[(e * d + a) * d + b] * j.grad[e];
      Hc[a * d + b] = s;
    }
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          s += Hc[a * d + b] * fr.e[i * d + a] * fr.e[k * d + b];
      out.hess[i * d + k] = s;
    }
  if (order < 3) return out;

  // nabla_c Hess_ab = d_c Hess_ab - Gamma^e_ca Hess_eb - Gamma^e_cb Hess_ae
  // with d_c Hess_ab = f_cab - (d_c Gamma^e_ab) f_e - Gamma^e_ab f_ce.
  double T[27];
  for (int cc = 0; cc < d; ++cc)
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        double s = j.third[cc][a][b];
        for (int e = 0; e < d; ++e) {
          s -= dGam[((cc * d + e) * d + a) * d + b] * j.grad[e];
          s -= Gam[(e * d + a) * d + b] * j.hess[cc][e];
          s -= Gam[(e * d + cc) * d + a] * Hc[e * d + b];
          s -= Gam[(e * d + cc) * d + b] * Hc[a * d + e];
        }
        T[(cc * d + a) * d + b] = s;
      }
  for (int l = 0; l < d; ++l)
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        double s = 0.0;
        for (int cc = 0; cc < d; ++cc)
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
              s += T[(cc * d + a) * d + b] * fr.e[l * d + cc] *
                   fr.e[i * d + a] * fr.e[k * d + b];
        out.third[(l * d + i) * d + k] = s;
      }
  return out;
}

ExpansionResiduals expansion_residuals(const MetricChart& chart,
                                       const double* p, const Frame& frame,
                                       const Expr& f, const SphereGrid& grid,
                                       const double* u_coeffs, double r) {
  const int n = grid.n();
  const int d = n + 1;
  const int nn = grid.num_nodes();

  RescaledMetric gm(chart, p, frame);
  gm.set_leaf(r, nullptr);

  // (Delta + n) u at the nodes
  std::vector<double> lap_u(nn);
  {
    std::vector<double> tmp(nn);
    grid.synthesize(u_coeffs, tmp.data());
    grid.apply_shifted_laplacian(tmp.data(), lap_u.data());
  }

  double ric[9];
  gm.frame_ricci(ric);

  ExpansionResiduals out;

  // H residual
  std::vector<double> H = mean_curvature(gm, grid, u_coeffs);
  for (int i = 0; i < nn; ++i) {
    double om[3];
    grid.node_omega(i, om);
    double rxx = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) rxx += ric[a * d + b] * om[a] * om[b];
    double model = n + r * r * (lap_u[i] - rxx / 3.0);
    out.h_resid = std::max(out.h_resid, std::abs(H[i] - model));
  }

  // F residual at u = 0
  FrameDerivs fd = covariant_frame_derivs(gm, f, 3);
  std::vector<double> zero(grid.num_coeffs(), 0.0);
  std::vector<double> F = f_restriction(gm, grid, f, zero.data());
  for (int i = 0; i < nn; ++i) {
    double om[3];
    grid.node_omega(i, om);
    double lin = 0.0, quad = 0.0;
    for (int a = 0; a < d; ++a) {
      lin += fd.grad[a] * om[a];
      for (int b = 0; b < d; ++b) quad += fd.hess[a * d + b] * om[a] * om[b];
    }
    double model = fd.fval + r * lin + 0.5 * r * r * quad;
    out.f_resid = std::max(out.f_resid, std::abs(F[i] - model));
  }

  // tau-derivative of F via central differences with one Richardson level
  const double ht = 1e-4;
  for (int l = 0; l < d; ++l) {
    auto F_at = [&](double t) {
      RescaledMetric gt(chart, p, frame);
      double tau[3] = {0, 0, 0};
      tau[l] = t;
      gt.set_leaf(r, tau);
      return f_restriction(gt, grid, f, zero.data());
    };
    std::vector<double> Fp = F_at(ht), Fm = F_at(-ht);
    std::vector<double> Fp2 = F_at(ht / 2), Fm2 = F_at(-ht / 2);
    for (int i = 0; i < nn; ++i) {
      double d1 = (Fp[i] - Fm[i]) / (2 * ht);
      double d2 = (Fp2[i] - Fm2[i]) / ht;
      double dF = (4.0 * d2 - d1) / 3.0;
      double om[3];
      grid.node_omega(i, om);
      double lin = 0.0, quad = 0.0;
      for (int a = 0; a < d; ++a) {
        lin += fd.hess[l * d + a] * om[a];
        for (int b = 0; b < d; ++b)
          quad += fd.third[(l * d + a) * d + b] * om[a] * om[b];
      }
      double model = fd.grad[l] + r * lin + 0.5 * r * r * quad;
      out.ftau_resid = std::max(out.ftau_resid, std::abs(dF - model));
    }
  }
  return out;
}

} // namespace pmc
