#include "doctest.h"

#include "pmc/geodesic.hpp"
#include "pmc/metric.hpp"
#include "pmc/smallmat.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace pmc;

namespace {

MetricChart hyperbolic_plane() {
  // Upper half plane, g = diag(1/x2^2, 1/x2^2). Geodesics are known in
  // closed form, which makes this the main integrator oracle.
  std::vector<Expr> diag;
  diag.push_back(Expr::parse("x2^-2", 2));
  diag.push_back(Expr::parse("x2^-2", 2));
  return MetricChart::diagonal(2, std::move(diag));
}

MetricChart sphere_chart() {
  // Stereographic chart of the unit round 2-sphere: g = (2/(1+|x|^2))^2 d.
  return MetricChart::conformal(2, Expr::parse("2 / (1 + x1^2 + x2^2)", 2));
}

MetricChart conformal_chart(int dim, double eps) {
  std::string r2 = "x1^2 + x2^2";
  if (dim == 3) r2 += " + x3^2";
  char buf[64];
  std::snprintf(buf, sizeof buf, "1 + %.17g * (%s)", eps, r2.c_str());
  return MetricChart::conformal(dim, Expr::parse(buf, dim));
}

double frob_err(int n, const double* a, const double* b) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

} // namespace

TEST_CASE("small matrix determinants, inverses, solves") {
  double A2[4] = {2, 1, 1, 3};
  CHECK(smallmat::det(2, A2) == doctest::Approx(5.0));
  double Ainv[9];
  REQUIRE(smallmat::invert(2, A2, Ainv));
  double I[4];
  smallmat::matmul(2, A2, Ainv, I);
  CHECK(I[0] == doctest::Approx(1.0));
  CHECK(I[1] == doctest::Approx(0.0));
  CHECK(I[3] == doctest::Approx(1.0));

  double A3[9] = {4, 1, 0, 1, 3, -1, 0, -1, 2};
  double b[3] = {1, 2, 3}, x[3];
  REQUIRE(smallmat::solve(3, A3, b, x));
  for (int i = 0; i < 3; ++i) {
    double s = 0;
    for (int j = 0; j < 3; ++j) s += A3[i * 3 + j] * x[j];
    CHECK(s == doctest::Approx(b[i]).epsilon(1e-12));
  }

  double S[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(!smallmat::invert(3, S, Ainv));
}

TEST_CASE("symmetric eigenvalues in closed form") {
  double A2[4] = {2, 1, 1, 2};
  double w[3];
  smallmat::sym_eigvals(2, A2, w);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(3.0));

  // eigenvalues 1, 2, 4 conjugated by a rotation
  double A3[9] = {2.28, -0.56, 0.64, -0.56, 2.52, 1.12, 0.64, 1.12, 2.2};
  smallmat::sym_eigvals(3, A3, w);
  // characteristic invariants instead of hand-computed spectrum
  double tr = A3[0] + A3[4] + A3[8];
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(tr).epsilon(1e-12));
  CHECK(w[0] * w[1] * w[2] == doctest::Approx(smallmat::det(3, A3)).epsilon(1e-10));
  CHECK(w[0] <= w[1]);
  CHECK(w[1] <= w[2]);

  double D[9] = {5, 0, 0, 0, 5, 0, 0, 0, 5};
  smallmat::sym_eigvals(3, D, w);
  CHECK(w[0] == doctest::Approx(5.0));
  CHECK(w[2] == doctest::Approx(5.0));
  CHECK(smallmat::cond_sym(3, D) == doctest::Approx(1.0));

  double c3[3], a[3] = {1, 0, 0}, bb[3] = {0, 1, 0};
  smallmat::cross3(a, bb, c3);
  CHECK(c3[2] == 1.0);
}

TEST_CASE("christoffel symbols of an exponential diagonal metric") {
  // g = diag(e^{2 x2}, 1): Gamma^1_12 = 1, Gamma^2_11 = -e^{2 x2}.
  std::vector<Expr> diag;
  diag.push_back(Expr::parse("exp(2 * x2)", 2));
  diag.push_back(Expr::parse("1", 2));
  MetricChart m = MetricChart::diagonal(2, std::move(diag));
  double x[2] = {0.3, -0.2};
  double Gam[8];
  m.christoffel(x, Gam);
  auto G = [&](int k, int i, int j) { return Gam[(k * 2 + i) * 2 + j]; };
  CHECK(G(0, 0, 1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(G(0, 1, 0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(G(1, 0, 0) == doctest::Approx(-std::exp(2 * x[1])).epsilon(1e-13));
  CHECK(G(1, 1, 1) == doctest::Approx(0.0));
  CHECK(G(0, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("christoffel symbols match finite differences of the metric") {
  std::mt19937_64 rng(0xc4a1);
  std::uniform_real_distribution<double> ux(-0.35, 0.35);
  std::vector<Expr> ent;
  const char* src[9] = {
      "1 + 0.2 * sin(x1) + 0.05 * x2^2", "0.1 * x1 * x2", "0.05 * x3",
      "0.1 * x1 * x2",  "1 + 0.1 * x3^2", "0.08 * sin(x2)",
      "0.05 * x3", "0.08 * sin(x2)", "1 + 0.15 * cos(x1)"};
  for (int i = 0; i < 9; ++i) ent.push_back(Expr::parse(src[i], 3));
  MetricChart m = MetricChart::general(3, std::move(ent));
  double lo[3] = {-0.4, -0.4, -0.4}, hi[3] = {0.4, 0.4, 0.4};
  m.validate_spd(lo, hi, 500);

  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    double x[3] = {ux(rng), ux(rng), ux(rng)};
    double Gam[27];
    m.christoffel(x, Gam);
    double g[9], ginv[9], dg[3][9];
    m.metric(x, g);
    REQUIRE(smallmat::invert(3, g, ginv));
    for (int l = 0; l < 3; ++l) {
      double xp[3] = {x[0], x[1], x[2]}, gp[9], gm[9];
      xp[l] += h;
      m.metric(xp, gp);
      xp[l] -= 2 * h;
      m.metric(xp, gm);
      for (int i = 0; i < 9; ++i) dg[l][i] = (gp[i] - gm[i]) / (2 * h);
    }
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double s = 0;
          for (int l = 0; l < 3; ++l)
            s += ginv[k * 3 + l] *
                 (dg[i][j * 3 + l] + dg[j][i * 3 + l] - dg[l][i * 3 + j]);
          CHECK(Gam[(k * 3 + i) * 3 + j] == doctest::Approx(0.5 * s).epsilon(1e-8));
        }
  }
}

TEST_CASE("ricci tensor matches a finite-difference construction") {
  // Assemble Ricci from centrally differenced Christoffel symbols and
  // compare with the jet-based evaluation, on both a conformal chart and
  // a dense 3d chart.
  auto check_chart = [](const MetricChart& m, unsigned seed, int npts) {
    const int d = m.dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-0.3, 0.3);
    const double h = 1e-5;
    for (int trial = 0; trial < npts; ++trial) {
      double x[3] = {0, 0, 0};
      for (int k = 0; k < d; ++k) x[k] = ux(rng);
      double Ric[9];
      m.ricci(x, Ric);

      double Gam[27], dGam[3][27];
      m.christoffel(x, Gam);
      for (int l = 0; l < d; ++l) {
        double xp[3] = {x[0], x[1], x[2]}, Gp[27], Gm[27];
        xp[l] += h;
        m.christoffel(xp, Gp);
        xp[l] -= 2 * h;
        m.christoffel(xp, Gm);
        for (int i = 0; i < d * d * d; ++i)
          dGam[l][i] = (Gp[i] - Gm[i]) / (2 * h);
      }
      auto G = [&](int k, int i, int j) { return Gam[(k * d + i) * d + j]; };
      auto dG = [&](int l, int k, int i, int j) {
        return dGam[l][(k * d + i) * d + j];
      };
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0;
          for (int k = 0; k < d; ++k) {
            s += dG(k, k, i, j) - dG(i, k, k, j);
            for (int l = 0; l < d; ++l)
              s += G(k, k, l) * G(l, i, j) - G(k, i, l) * G(l, k, j);
          }
          CHECK(std::abs(Ric[i * d + j] - s) <= 1e-6);
        }
    }
  };
  check_chart(conformal_chart(2, 0.25), 0xf00d, 25);

  std::vector<Expr> ent;
  const char* src[9] = {
      "1 + 0.2 * sin(x1) + 0.05 * x2^2", "0.1 * x1 * x2", "0.05 * x3",
      "0.1 * x1 * x2",  "1 + 0.1 * x3^2", "0.08 * sin(x2)",
      "0.05 * x3", "0.08 * sin(x2)", "1 + 0.15 * cos(x1)"};
  for (int i = 0; i < 9; ++i) ent.push_back(Expr::parse(src[i], 3));
  check_chart(MetricChart::general(3, std::move(ent)), 0xbeef, 25);
}

TEST_CASE("ricci of the conformal chart at the origin, closed form") {
  // g = (1 + eps |x|^2)^2 delta has Ric(0) = -4 eps (d-1) delta.
  for (int d : {2, 3}) {
    double eps = 0.1;
    MetricChart m = conformal_chart(d, eps);
    double x[3] = {0, 0, 0}, Ric[9];
    m.ricci(x, Ric);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double want = i == j ? -4.0 * eps * (d - 1) : 0.0;
        CHECK(Ric[i * d + j] == doctest::Approx(want).epsilon(1e-10));
      }
  }
  // Sphere chart sanity: Ric = K g with K = 1, so Ric(0) = 4 delta. This
  // pins the overall sign convention.
  MetricChart s = sphere_chart();
  double x0[2] = {0, 0}, Ric[4];
  s.ricci(x0, Ric);
  CHECK(Ric[0] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(Ric[3] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(std::abs(Ric[1]) < 1e-10);
}

TEST_CASE("metric validation rejects non-SPD input") {
  std::vector<Expr> diag;
  diag.push_back(Expr::parse("1 - 3 * x1^2", 2));
  diag.push_back(Expr::parse("1", 2));
  MetricChart m = MetricChart::diagonal(2, std::move(diag));
  double lo[2] = {-1, -1}, hi[2] = {1, 1};
  CHECK_THROWS_AS(m.validate_spd(lo, hi, 500), std::runtime_error);
  double lo2[2] = {-0.3, -0.3}, hi2[2] = {0.3, 0.3};
  CHECK_NOTHROW(m.validate_spd(lo2, hi2, 500));

  std::vector<Expr> asym;
  asym.push_back(Expr::parse("1", 2));
  asym.push_back(Expr::parse("0.2 * x1", 2));
  asym.push_back(Expr::parse("0.1 * x1", 2));
  asym.push_back(Expr::parse("1", 2));
  MetricChart a = MetricChart::general(2, std::move(asym));
  CHECK_THROWS_AS(a.validate_spd(lo2, hi2, 500), std::runtime_error);
}

TEST_CASE("exponential map against closed-form hyperbolic geodesics") {
  MetricChart m = hyperbolic_plane();
  double p[2] = {0.0, 1.0};

  // vertical geodesic: exp_(0,1)(0, a) = (0, e^a)
  for (double a : {0.3, 1.0, -0.7}) {
    double v[2] = {0.0, a};
    GeodesicEnd e = exp_map(m, p, v);
    CHECK(e.x[0] == doctest::Approx(0.0));
    CHECK(e.x[1] == doctest::Approx(std::exp(a)).epsilon(1e-11));
    CHECK(e.err <= 1e-10);
  }

  // horizontal launch: exp_(0,1)(a, 0) = (tanh a, sech a)
  for (double a : {0.4, 1.2}) {
    double v[2] = {a, 0.0};
    GeodesicEnd e = exp_map(m, p, v);
    CHECK(e.x[0] == doctest::Approx(std::tanh(a)).epsilon(1e-11));
    CHECK(e.x[1] == doctest::Approx(1.0 / std::cosh(a)).epsilon(1e-11));
  }

  // Euclidean chart: exp is exactly affine.
  MetricChart eu = MetricChart::euclidean(3);
  double q[3] = {0.1, -0.2, 0.3}, w[3] = {0.05, 0.02, -0.04};
  GeodesicEnd e = exp_map(eu, q, w);
  for (int i = 0; i < 3; ++i)
    CHECK(e.x[i] == doctest::Approx(q[i] + w[i]).epsilon(1e-15));
}

TEST_CASE("exponential map converges at better than fourth order") {
  MetricChart m = conformal_chart(2, 0.3);
  double p[2] = {0.1, -0.2};
  double v[2] = {0.9, 1.1};
  GeodesicEnd ref = exp_map(m, p, v, 96);
  GeodesicEnd e8 = exp_map(m, p, v, 8);
  GeodesicEnd e16 = exp_map(m, p, v, 16);
  double err8 = std::hypot(e8.x[0] - ref.x[0], e8.x[1] - ref.x[1]);
  double err16 = std::hypot(e16.x[0] - ref.x[0], e16.x[1] - ref.x[1]);
  REQUIRE(err16 > 0.0);
  double order = std::log2(err8 / err16);
  CHECK(order >= 4.5);
}

TEST_CASE("step-halving error estimate is small on leaf-scale geodesics") {
  MetricChart m = conformal_chart(3, 0.2);
  double p[3] = {0.05, -0.1, 0.02};
  std::mt19937_64 rng(0x9e0d);
  std::uniform_real_distribution<double> uv(-0.08, 0.08);
  for (int trial = 0; trial < 10; ++trial) {
    double v[3] = {uv(rng), uv(rng), uv(rng)};
    GeodesicEnd e = exp_map(m, p, v);
    CHECK(e.err <= 1e-10);
  }
}

TEST_CASE("orthonormal frames and rotations") {
  MetricChart m = hyperbolic_plane();
  double p[2] = {0.4, 0.7};
  Frame f = orthonormal_frame(m, p);
  double g[4];
  m.metric(p, g);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          s += g[a * 2 + b] * f.e[i * 2 + a] * f.e[j * 2 + b];
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
    }
  double th = 0.77;
  double R[4] = {std::cos(th), -std::sin(th), std::sin(th), std::cos(th)};
  Frame fr = rotate_frame(f, R);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          s += g[a * 2 + b] * fr.e[i * 2 + a] * fr.e[j * 2 + b];
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
    }
}

TEST_CASE("parallel transport preserves inner products and inverts") {
  MetricChart m = conformal_chart(3, 0.25);
  double p[3] = {0.1, 0.2, -0.1};
  Frame f = orthonormal_frame(m, p);
  double v[3] = {0.3, -0.2, 0.4};
  TransportEnd t = parallel_transport(m, p, v, f.e, 3);
  CHECK(t.drift <= 1e-10);

  // transport back along the reversed geodesic
  GeodesicEnd fwd = exp_map(m, p, v);
  double vb[3] = {-fwd.v[0], -fwd.v[1], -fwd.v[2]};
  TransportEnd back = parallel_transport(m, t.x, vb, t.vecs, 3);
  for (int i = 0; i < 9; ++i)
    CHECK(back.vecs[i] == doctest::Approx(f.e[i]).epsilon(1e-9));
  for (int i = 0; i < 3; ++i)
    CHECK(back.x[i] == doctest::Approx(p[i]).epsilon(1e-9));
}

TEST_CASE("rescaled metric is the identity at the origin") {
  MetricChart m = conformal_chart(2, 0.3);
  double p[2] = {0.2, -0.1};
  RescaledMetric rm(m, p, orthonormal_frame(m, p));
  double tau[2] = {0.05, -0.02};
  rm.set_leaf(0.04, tau);
  double x0[2] = {0, 0}, g[4];
  rm.gbar(x0, g);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 1.0);
}

TEST_CASE("rescaled metric tends to the identity as r -> 0") {
  MetricChart m = conformal_chart(3, 0.4);
  double p[3] = {0.1, 0.05, -0.2};
  RescaledMetric rm(m, p, orthonormal_frame(m, p));
  rm.set_leaf(1e-6, nullptr);
  std::mt19937_64 rng(0x715e);
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    double x[3] = {ux(rng), ux(rng), ux(rng)};
    double g[9];
    rm.gbar(x, g);
    double id[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK(frob_err(9, g, id) <= 1e-4);
  }
}

TEST_CASE("rescaled metric of the round sphere, closed form") {
  // Unit round sphere: at |x| = 1 the leaf metric has the radial direction
  // as a unit eigenvector (Gauss lemma) and tangential eigenvalue
  // (sin r / r)^2; the determinant is (sin r / r)^2 in dimension 2.
  MetricChart m = sphere_chart();
  double p[2] = {0.3, -0.1};
  RescaledMetric rm(m, p, orthonormal_frame(m, p));
  double r = 0.2;
  rm.set_leaf(r, nullptr);
  double srr = std::sin(r) / r;
  std::mt19937_64 rng(0x5fe1e);
  std::uniform_real_distribution<double> uth(0.0, 2 * M_PI);
  for (int trial = 0; trial < 6; ++trial) {
    double th = uth(rng);
    double x[2] = {std::cos(th), std::sin(th)};
    double g[4];
    rm.gbar(x, g);
    // radial vector fixed with eigenvalue 1
    double gx0 = g[0] * x[0] + g[1] * x[1];
    double gx1 = g[2] * x[0] + g[3] * x[1];
    CHECK(gx0 == doctest::Approx(x[0]).epsilon(1e-9));
    CHECK(gx1 == doctest::Approx(x[1]).epsilon(1e-9));
    CHECK(smallmat::det(2, g) == doctest::Approx(srr * srr).epsilon(1e-9));
  }

  // Hyperbolic plane: tangential eigenvalue (sinh r / r)^2 instead.
  MetricChart h = hyperbolic_plane();
  double q[2] = {0.2, 1.3};
  RescaledMetric rh(h, q, orthonormal_frame(h, q));
  rh.set_leaf(r, nullptr);
  double shr = std::sinh(r) / r;
  double x[2] = {std::cos(1.1), std::sin(1.1)};
  double g[4];
  rh.gbar(x, g);
  CHECK(smallmat::det(2, g) == doctest::Approx(shr * shr).epsilon(1e-9));
}

TEST_CASE("rescaled metric derivatives are self-consistent") {
  MetricChart m = conformal_chart(2, 0.35);
  double p[2] = {0.15, -0.05};
  RescaledMetric rm(m, p, orthonormal_frame(m, p));
  double tau[2] = {0.03, 0.01};
  rm.set_leaf(0.05, tau);
  std::mt19937_64 rng(0xd1f);
  std::uniform_real_distribution<double> uth(0.0, 2 * M_PI);
  for (int trial = 0; trial < 4; ++trial) {
    double th = uth(rng);
    double x[2] = {std::cos(th), std::sin(th)};
    double g[4], dg[8];
    rm.gbar_d(x, g, dg);
    // compare against a plain secant at a different step
    const double h2 = 0.005;
    for (int k = 0; k < 2; ++k) {
      double xp[2] = {x[0], x[1]}, gp[4], gm[4];
      xp[k] += h2;
      rm.gbar(xp, gp);
      xp[k] -= 2 * h2;
      rm.gbar(xp, gm);
      for (int i = 0; i < 4; ++i) {
        double sec = (gp[i] - gm[i]) / (2 * h2);
        CHECK(std::abs(dg[k * 4 + i] - sec) <= 1e-6);
      }
    }
  }
}

TEST_CASE("rescaled metric on a euclidean chart is exactly flat") {
  MetricChart m = MetricChart::euclidean(3);
  double p[3] = {0.3, 0.1, -0.2};
  RescaledMetric rm(m, p, orthonormal_frame(m, p));
  double tau[3] = {0.1, -0.05, 0.02};
  rm.set_leaf(0.05, tau);
  double x[3] = {0.6, -0.7, 0.4}, g[9], dg[27];
  rm.gbar_d(x, g, dg);
  double id[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK(frob_err(9, g, id) <= 1e-13);
  for (int i = 0; i < 27; ++i) CHECK(std::abs(dg[i]) <= 1e-11);
}

TEST_CASE("second christoffel derivatives match finite differences") {
  std::vector<Expr> entries;
  entries.push_back(Expr::parse("1 + 0.2 * sin(x1) + 0.05 * x2^2", 3));
  entries.push_back(Expr::parse("0.1 * x1 * x2", 3));
  entries.push_back(Expr::parse("0.05 * x3", 3));
  entries.push_back(Expr::parse("0.1 * x1 * x2", 3));
  entries.push_back(Expr::parse("1 + 0.1 * exp(0.3 * x3)", 3));
  entries.push_back(Expr::parse("0.08 * x2 * x3", 3));
  entries.push_back(Expr::parse("0.05 * x3", 3));
  entries.push_back(Expr::parse("0.08 * x2 * x3", 3));
  entries.push_back(Expr::parse("1 + 0.15 * x1^2", 3));
  MetricChart m = MetricChart::general(3, std::move(entries));
  const int d = 3;
  double x[3] = {0.2, -0.1, 0.15};
  double Gam[27], dGam[81], ddGam[243];
  m.christoffel_dd(x, Gam, dGam, ddGam);

  // consistency with the lower-order evaluators at the same point
  double Gam2[27], dGam2[81];
  m.christoffel_d(x, Gam2, dGam2);
  CHECK(frob_err(27, Gam, Gam2) <= 1e-13);
  CHECK(frob_err(81, dGam, dGam2) <= 1e-13);

  const double h = 1e-5;
  for (int e = 0; e < d; ++e) {
    double xp[3] = {x[0], x[1], x[2]}, Gp[27], Dp[81], Gm[27], Dm[81];
    xp[e] += h;
    m.christoffel_d(xp, Gp, Dp);
    xp[e] -= 2 * h;
    m.christoffel_d(xp, Gm, Dm);
    for (int i = 0; i < 81; ++i) {
      double fd = (Dp[i] - Dm[i]) / (2 * h);
      CHECK(std::abs(ddGam[e * 81 + i] - fd) <= 1e-6);
    }
  }
}

TEST_CASE("analytic rescaled-metric derivatives match the stencil oracle") {
  // 3d conformal chart with tau shift
  {
    MetricChart m = conformal_chart(3, 0.2);
    double p[3] = {0.1, -0.2, 0.05};
    RescaledMetric rm(m, p, orthonormal_frame(m, p));
    double tau[3] = {0.02, -0.01, 0.03};
    rm.set_leaf(0.08, tau);
    double pts[3][3] = {{1, 0, 0}, {-0.36, 0.48, 0.8}, {0.6, -0.64, -0.48}};
    for (auto& x : pts) {
      double g[9], dg[27], g2[9], dg2[27];
      rm.gbar_d(x, g, dg);
      rm.gbar_d_fd(x, g2, dg2);
      CHECK(frob_err(9, g, g2) <= 1e-10);
      CHECK(frob_err(27, dg, dg2) <= 1e-7);
    }
  }
  // hyperbolic plane, larger radius
  {
    std::vector<Expr> diag;
    diag.push_back(Expr::parse("x2^-2", 2));
    diag.push_back(Expr::parse("x2^-2", 2));
    MetricChart m = MetricChart::diagonal(2, std::move(diag));
    double p[2] = {0.0, 1.0};
    RescaledMetric rm(m, p, orthonormal_frame(m, p));
    rm.set_leaf(0.3, nullptr);
    double x[2] = {0.28, -0.96};
    double g[4], dg[8], g2[4], dg2[8];
    rm.gbar_d(x, g, dg);
    rm.gbar_d_fd(x, g2, dg2);
    CHECK(frob_err(4, g, g2) <= 1e-10);
    CHECK(frob_err(8, dg, dg2) <= 1e-7);
  }
}
