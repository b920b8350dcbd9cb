#include "doctest.h"

#include "pmc/meancurv.hpp"
#include "pmc/smallmat.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

using namespace pmc;

namespace {

MetricChart hyperbolic_plane() {
  std::vector<Expr> diag;
  diag.push_back(Expr::parse("x2^-2", 2));
  diag.push_back(Expr::parse("x2^-2", 2));
  return MetricChart::diagonal(2, std::move(diag));
}

MetricChart sphere_chart() {
  // Stereographic chart of the unit round 2-sphere.
  return MetricChart::conformal(2, Expr::parse("2 / (1 + x1^2 + x2^2)", 2));
}

MetricChart conformal_chart(int dim, double eps) {
  std::string r2 = "x1^2 + x2^2";
  if (dim == 3) r2 += " + x3^2";
  char buf[64];
  std::snprintf(buf, sizeof buf, "1 + %.17g * (%s)", eps, r2.c_str());
  return MetricChart::conformal(dim, Expr::parse(buf, dim));
}

// Same full Richardson tableau as in the expression tests.
template <class Fn>
double fd_deriv(Fn&& g, int order, double h0) {
  auto stencil = [&](double h) {
    switch (order) {
      case 1: return (g(h) - g(-h)) / (2 * h);
      case 2: return (g(h) - 2 * g(0.0) + g(-h)) / (h * h);
      default:
        return (g(2 * h) - 2 * g(h) + 2 * g(-h) - g(-2 * h)) / (2 * h * h * h);
    }
  };
  const int K = 5;
  double A[K][K];
  double h = h0;
  for (int i = 0; i < K; ++i) {
    A[i][0] = stencil(h);
    double fac = 1.0;
    for (int j = 1; j <= i; ++j) {
      fac *= 4.0;
      A[i][j] = (A[i][j - 1] * fac - A[i - 1][j - 1]) / (fac - 1.0);
    }
    h /= 2;
  }
  return A[K - 1][K - 1];
}

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  int m = (int)x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// u identically equal to c, expressed in the orthonormal basis: only the
// constant coefficient is nonzero and equals c * sqrt(|S^n|).
std::vector<double> const_u(const SphereGrid& grid, double c) {
  std::vector<double> u(grid.num_coeffs(), 0.0);
  u[0] = c * std::sqrt(sphere_area(grid.n()));
  return u;
}

} // namespace

TEST_CASE("round spheres in a flat chart have H = n") {
  for (int n : {1, 2}) {
    MetricChart chart = MetricChart::euclidean(n + 1);
    double p[3] = {0.3, -0.2, 0.1};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(0.05, nullptr);
    SphereGrid grid(n, n == 1 ? 6 : 4);
    std::vector<double> u(grid.num_coeffs(), 0.0);
    std::vector<double> H = mean_curvature(gm, grid, u.data());
    for (double h : H) CHECK(std::abs(h - n) < 1e-12);
  }
}

TEST_CASE("flat chart, constant u: H = n / (1 - r^2 c)") {
  const double r = 0.3, c = 0.8;
  for (int n : {1, 2}) {
    MetricChart chart = MetricChart::euclidean(n + 1);
    double p[3] = {0, 0, 0};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(r, nullptr);
    SphereGrid grid(n, 4);
    std::vector<double> u = const_u(grid, c);
    std::vector<double> H = mean_curvature(gm, grid, u.data());
    double expect = n / (1.0 - r * r * c);
    for (double h : H) CHECK(std::abs(h - expect) < 1e-10);
  }
}

TEST_CASE("geodesic circles on the round sphere and hyperbolic plane") {
  const double r = 0.2;
  SphereGrid grid(1, 4);
  std::vector<double> u(grid.num_coeffs(), 0.0);

  {
    MetricChart chart = sphere_chart();
    double p[2] = {0.1, -0.05};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(r, nullptr);
    std::vector<double> H = mean_curvature(gm, grid, u.data());
    double expect = r * std::cos(r) / std::sin(r);
    for (double h : H) CHECK(std::abs(h - expect) < 1e-8);
  }
  {
    MetricChart chart = hyperbolic_plane();
    double p[2] = {0.2, 1.3};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(r, nullptr);
    std::vector<double> H = mean_curvature(gm, grid, u.data());
    double expect = r * std::cosh(r) / std::sinh(r);
    for (double h : H) CHECK(std::abs(h - expect) < 1e-8);
  }
}

TEST_CASE("H matches the geodesic curvature of the actual deformed curve") {
  // Independent oracle on a curved surface with u != 0 and tau != 0: build
  // the deformed curve C(th) = exp_c(r rho(th) x^k(th) e_k) directly in the
  // chart and measure r * k_g by finite differences of C.
  MetricChart chart = conformal_chart(2, 0.3);
  double p[2] = {0.15, -0.1};
  Frame fr = orthonormal_frame(chart, p);
  RescaledMetric gm(chart, p, fr);
  const double r = 0.15;
  double tau[2] = {0.03, -0.02};
  gm.set_leaf(r, tau);

  SphereGrid grid(1, 4);
  std::vector<double> u(grid.num_coeffs(), 0.0);
  u[0] = 0.25;
  u[1] = 0.15;  // sin th
  u[4] = 0.10;  // cos 2th
  std::vector<double> H = mean_curvature(gm, grid, u.data());

  const double* c = gm.center();
  const Frame& ft = gm.frame();
  auto curve = [&](double th) {
    double rho = 1.0 - r * r * grid.eval(u.data(), th);
    double v[2];
    for (int a = 0; a < 2; ++a)
      v[a] = r * rho * (std::cos(th) * ft.e[a] + std::sin(th) * ft.e[2 + a]);
    GeodesicEnd end = exp_map(chart, c, v, 64);
    return std::array<double, 2>{end.x[0], end.x[1]};
  };

  const double h = 0.01;
  for (int i = 0; i < 10; ++i) {
    double th = grid.theta(i);
    auto Pm2 = curve(th - 2 * h), Pm1 = curve(th - h), P0 = curve(th);
    auto Pp1 = curve(th + h), Pp2 = curve(th + 2 * h);
    double d1[2], d2[2];
    for (int a = 0; a < 2; ++a) {
      d1[a] = (Pm2[a] - 8 * Pm1[a] + 8 * Pp1[a] - Pp2[a]) / (12 * h);
      d2[a] = (-Pm2[a] + 16 * Pm1[a] - 30 * P0[a] + 16 * Pp1[a] - Pp2[a]) /
              (12 * h * h);
    }
    double g[4], Gam[8];
    chart.metric(P0.data(), g);
    chart.christoffel(P0.data(), Gam);
    double acc[2];
    for (int k = 0; k < 2; ++k) {
      double s = d2[k];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) s += Gam[(k * 2 + a) * 2 + b] * d1[a] * d1[b];
      acc[k] = s;
    }
    // inward unit normal in g: rotate the covector of the tangent, then
    // orient towards the center
    double w[2] = {g[0] * d1[0] + g[1] * d1[1], g[2] * d1[0] + g[3] * d1[1]};
    double N[2] = {-w[1], w[0]};
    double nn = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) nn += g[a * 2 + b] * N[a] * N[b];
    nn = std::sqrt(nn);
    N[0] /= nn;
    N[1] /= nn;
    double toc[2] = {c[0] - P0[0], c[1] - P0[1]};
    double orient = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) orient += g[a * 2 + b] * N[a] * toc[b];
    if (orient < 0) {
      N[0] = -N[0];
      N[1] = -N[1];
    }
    double s2 = 0, kg = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        s2 += g[a * 2 + b] * d1[a] * d1[b];
        kg += g[a * 2 + b] * acc[a] * N[b];
      }
    kg /= s2;
    CHECK(std::abs(H[i] - r * kg) < 1e-6);
  }
}

TEST_CASE("graph guard rejects leaves outside the tubular neighborhood") {
  MetricChart chart = MetricChart::euclidean(2);
  double p[2] = {0, 0};
  Frame fr = orthonormal_frame(chart, p);
  RescaledMetric gm(chart, p, fr);
  gm.set_leaf(0.5, nullptr);
  SphereGrid grid(1, 4);
  std::vector<double> u = const_u(grid, 1.0);  // r^2 |u| = 0.25 >= 0.1
  CHECK_THROWS_AS(mean_curvature(gm, grid, u.data()), std::runtime_error);
}

TEST_CASE("the quadratic Ricci term has no component along coordinates") {
  // Ric_ij x^i x^j is even, so its projection onto span{x^i} vanishes.
  for (int dim : {2, 3}) {
    MetricChart chart = conformal_chart(dim, dim == 2 ? 0.3 : 0.2);
    double p[3] = {0.2, -0.15, 0.1};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(0.05, nullptr);
    double ric[9];
    gm.frame_ricci(ric);
    SphereGrid grid(dim - 1, 4);
    std::vector<double> h(grid.num_nodes());
    for (int i = 0; i < grid.num_nodes(); ++i) {
      double om[3];
      grid.node_omega(i, om);
      double s = 0;
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) s += ric[a * dim + b] * om[a] * om[b];
      h[i] = s;
    }
    double b[3];
    grid.k_components(h.data(), b);
    for (int j = 0; j < dim; ++j) CHECK(std::abs(b[j]) < 1e-10);
  }
}

TEST_CASE("H is invariant under the hyperbolic dilation isometry") {
  // (x, y) -> (2x, 2y) is an isometry of the half plane that maps the
  // Gram-Schmidt frame at (0,1) to the one at (0,2), so every node value
  // of H must coincide between the two base points.
  MetricChart chart = hyperbolic_plane();
  SphereGrid grid(1, 6);
  std::vector<double> u(grid.num_coeffs(), 0.0);
  u[0] = 0.2;
  u[2] = 0.12;  // cos th
  u[3] = 0.07;  // sin 2th
  double tau[2] = {0.05, -0.03};

  std::vector<double> H1, H2;
  {
    double p[2] = {0, 1};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(0.1, tau);
    H1 = mean_curvature(gm, grid, u.data());
  }
  {
    double p[2] = {0, 2};
    Frame fr = orthonormal_frame(chart, p);
    RescaledMetric gm(chart, p, fr);
    gm.set_leaf(0.1, tau);
    H2 = mean_curvature(gm, grid, u.data());
  }
  for (int i = 0; i < grid.num_nodes(); ++i)
    CHECK(std::abs(H1[i] - H2[i]) < 1e-8);
}

TEST_CASE("expansion residuals decay like r^3") {
  std::vector<double> radii = {0.05, 0.04, 0.03, 0.02};
  for (int dim : {2, 3}) {
    MetricChart chart = conformal_chart(dim, dim == 2 ? 0.15 : 0.1);
    const char* fsrc = dim == 2
                           ? "1 + 0.5*x1 + 0.3*x2 - 0.2*x1*x2 + 0.1*x1^3"
                           : "1 + 0.5*x1 + 0.3*x2 - 0.2*x1*x3 + 0.1*x1^3 + "
                             "0.05*x2^2*x3";
    Expr f = Expr::parse(fsrc, dim);
    double p[3] = {0.1, -0.05, 0.15};
    Frame fr = orthonormal_frame(chart, p);
    SphereGrid grid(dim - 1, dim == 2 ? 4 : 3);
    std::vector<double> u(grid.num_coeffs(), 0.0);
    u[0] = 0.3;
    u[grid.num_coeffs() - 1] = 0.2;

    std::vector<double> hr, fr_, tr;
    for (double r : radii) {
      ExpansionResiduals res =
          expansion_residuals(chart, p, fr, f, grid, u.data(), r);
      hr.push_back(res.h_resid);
      fr_.push_back(res.f_resid);
      tr.push_back(res.ftau_resid);
    }
    CHECK(loglog_slope(radii, hr) >= 2.9);
    CHECK(loglog_slope(radii, fr_) >= 2.9);
    CHECK(loglog_slope(radii, tr) >= 2.9);
  }
}

TEST_CASE("covariant frame derivatives match geodesic directional derivatives") {
  // For a geodesic gamma(t) = exp_p(t v), the derivatives of f(gamma(t))
  // at t = 0 are exactly grad.v, Hess(v, v) and third(v; v, v).
  MetricChart chart = conformal_chart(3, 0.12);
  double p[3] = {0.2, -0.1, 0.3};
  Frame fr = orthonormal_frame(chart, p);
  RescaledMetric gm(chart, p, fr);
  gm.set_leaf(0.05, nullptr);
  Expr f = Expr::parse("1 + 0.4*x1 - 0.3*x2*x3 + 0.2*x1^2*x2 + sin(x3)", 3);
  FrameDerivs fd = covariant_frame_derivs(gm, f, 3);

  // symmetry of the Hessian and of the last two slots of the third tensor
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(fd.hess[i * 3 + j] - fd.hess[j * 3 + i]) < 1e-12);
      for (int l = 0; l < 3; ++l)
        CHECK(std::abs(fd.third[(l * 3 + i) * 3 + j] -
                       fd.third[(l * 3 + j) * 3 + i]) < 1e-12);
    }

  const double dirs[3][3] = {{1, 0, 0}, {0.3, -0.8, 0.5}, {-0.2, 0.4, 0.9}};
  for (auto& cdir : dirs) {
    double v[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 3; ++a) v[a] += cdir[i] * fr.e[i * 3 + a];
    auto phi = [&](double t) {
      double vt[3] = {t * v[0], t * v[1], t * v[2]};
      GeodesicEnd end = exp_map(chart, p, vt);
      return f.eval(end.x);
    };
    double m1 = 0, m2 = 0, m3 = 0;
    for (int i = 0; i < 3; ++i) {
      m1 += fd.grad[i] * cdir[i];
      for (int j = 0; j < 3; ++j) {
        m2 += fd.hess[i * 3 + j] * cdir[i] * cdir[j];
        for (int l = 0; l < 3; ++l)
          m3 += fd.third[(l * 3 + i) * 3 + j] * cdir[l] * cdir[i] * cdir[j];
      }
    }
    CHECK(std::abs(fd_deriv(phi, 1, 0.2) - m1) < 1e-8 * std::max(1.0, std::abs(m1)));
    CHECK(std::abs(fd_deriv(phi, 2, 0.2) - m2) < 1e-6 * std::max(1.0, std::abs(m2)));
    CHECK(std::abs(fd_deriv(phi, 3, 0.2) - m3) < 3e-5 * std::max(1.0, std::abs(m3)));
  }
}
