#include "pmc/metric.hpp"

#include "pmc/smallmat.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pmc {

namespace {

// Jet of a constant in the given dimension.
Jet3 const_jet(int dim, int order, double c) {
  Jet3 j;
  j.dim = dim;
  j.order = order;
  j.value = c;
  return j;
}

// Jet of phi^2 from the jet of phi (product rule through third order).
Jet3 square_jet(const Jet3& a) {
  Jet3 r;
  r.dim = a.dim;
  r.order = a.order;
  r.value = a.value * a.value;
  for (int i = 0; i < 3; ++i) r.grad[i] = 2.0 * a.value * a.grad[i];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.hess[i][j] = 2.0 * (a.grad[i] * a.grad[j] + a.value * a.hess[i][j]);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        r.third[i][j][k] =
            2.0 * (a.value * a.third[i][j][k] + a.grad[i] * a.hess[j][k] +
                   a.grad[j] * a.hess[i][k] + a.grad[k] * a.hess[i][j]);
  return r;
}

} // namespace

MetricChart MetricChart::euclidean(int dim) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("metric dimension must be 2 or 3");
  return MetricChart(Kind::euclidean, dim);
}

MetricChart MetricChart::conformal(int dim, Expr factor) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("metric dimension must be 2 or 3");
  if (factor.dim() != dim)
    throw std::invalid_argument("conformal factor dimension mismatch");
  MetricChart m(Kind::conformal, dim);
  m.exprs_.push_back(std::move(factor));
  return m;
}

MetricChart MetricChart::diagonal(int dim, std::vector<Expr> diag) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("metric dimension must be 2 or 3");
  if ((int)diag.size() != dim)
    throw std::invalid_argument("diagonal metric needs dim entries");
  for (const Expr& e : diag)
    if (e.dim() != dim)
      throw std::invalid_argument("diagonal metric entry dimension mismatch");
  MetricChart m(Kind::diagonal, dim);
  m.exprs_ = std::move(diag);
  return m;
}

MetricChart MetricChart::general(int dim, std::vector<Expr> entries) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("metric dimension must be 2 or 3");
  if ((int)entries.size() != dim * dim)
    throw std::invalid_argument("general metric needs dim*dim entries");
  for (const Expr& e : entries)
    if (e.dim() != dim)
      throw std::invalid_argument("general metric entry dimension mismatch");
  MetricChart m(Kind::general, dim);
  m.exprs_ = std::move(entries);
  return m;
}

void MetricChart::metric(const double* x, double* g) const {
  const int d = dim_;
  switch (kind_) {
    case Kind::euclidean:
      for (int i = 0; i < d * d; ++i) g[i] = 0.0;
      for (int i = 0; i < d; ++i) g[i * d + i] = 1.0;
      break;
    case Kind::conformal: {
      double phi = exprs_[0].eval(x);
      for (int i = 0; i < d * d; ++i) g[i] = 0.0;
      for (int i = 0; i < d; ++i) g[i * d + i] = phi * phi;
      break;
    }
    case Kind::diagonal:
      for (int i = 0; i < d * d; ++i) g[i] = 0.0;
      for (int i = 0; i < d; ++i) g[i * d + i] = exprs_[i].eval(x);
      break;
    case Kind::general:
      for (int i = 0; i < d * d; ++i) g[i] = exprs_[i].eval(x);
      break;
  }
}

void MetricChart::metric_jets(const double* x, int order, Jet3* jets) const {
  const int d = dim_;
  switch (kind_) {
    case Kind::euclidean:
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          jets[i * d + j] = const_jet(d, order, i == j ? 1.0 : 0.0);
      break;
    case Kind::conformal: {
      Jet3 phi2 = square_jet(exprs_[0].eval_jet(x, order));
      Jet3 zero = const_jet(d, order, 0.0);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) jets[i * d + j] = i == j ? phi2 : zero;
      break;
    }
    case Kind::diagonal: {
      Jet3 zero = const_jet(d, order, 0.0);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          jets[i * d + j] = i == j ? exprs_[i].eval_jet(x, order) : zero;
      break;
    }
    case Kind::general:
      for (int i = 0; i < d * d; ++i) jets[i] = exprs_[i].eval_jet(x, order);
      break;
  }
}

void MetricChart::christoffel(const double* x, double* Gam) const {
  const int d = dim_;
  if (kind_ == Kind::euclidean) {
    for (int i = 0; i < d * d * d; ++i) Gam[i] = 0.0;
    return;
  }
  Jet3 jets[9];
  metric_jets(x, 1, jets);
  double g[9], ginv[9];
  for (int i = 0; i < d * d; ++i) g[i] = jets[i].value;
  if (!smallmat::invert(d, g, ginv))
    throw std::runtime_error("metric is singular at evaluation point");
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l)
          s += ginv[k * d + l] * (jets[j * d + l].grad[i] +
                                  jets[i * d + l].grad[j] -
                                  jets[i * d + j].grad[l]);
        Gam[(k * d + i) * d + j] = 0.5 * s;
      }
}

void MetricChart::christoffel_d(const double* x, double* Gam,
                                double* dGam) const {
  const int d = dim_;
  if (kind_ == Kind::euclidean) {
    for (int i = 0; i < d * d * d; ++i) Gam[i] = 0.0;
    for (int i = 0; i < d * d * d * d; ++i) dGam[i] = 0.0;
    return;
  }
  Jet3 jets[9];
  metric_jets(x, 2, jets);
  double g[9], ginv[9];
  for (int i = 0; i < d * d; ++i) g[i] = jets[i].value;
  if (!smallmat::invert(d, g, ginv))
    throw std::runtime_error("metric is singular at evaluation point");

  // dginv[l][a][b] = d_l (g^-1)_ab = -(g^-1 d_l g g^-1)_ab
  double dginv[3][9];
  for (int l = 0; l < d; ++l) {
    double dg[9], t1[9];
    for (int i = 0; i < d * d; ++i) dg[i] = jets[i].grad[l];
    smallmat::matmul(d, ginv, dg, t1);
    smallmat::matmul(d, t1, ginv, dginv[l]);
    for (int i = 0; i < d * d; ++i) dginv[l][i] = -dginv[l][i];
  }

  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l)
          s += ginv[k * d + l] * (jets[j * d + l].grad[i] +
                                  jets[i * d + l].grad[j] -
                                  jets[i * d + j].grad[l]);
        Gam[(k * d + i) * d + j] = 0.5 * s;
      }

  for (int m = 0; m < d; ++m)
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int l = 0; l < d; ++l) {
            s += dginv[m][k * d + l] * (jets[j * d + l].grad[i] +
                                        jets[i * d + l].grad[j] -
                                        jets[i * d + j].grad[l]);
            s += ginv[k * d + l] * (jets[j * d + l].hess[m][i] +
                                    jets[i * d + l].hess[m][j] -
                                    jets[i * d + j].hess[m][l]);
          }
          dGam[((m * d + k) * d + i) * d + j] = 0.5 * s;
        }
}

void MetricChart::christoffel_dd(const double* x, double* Gam, double* dGam,
                                 double* ddGam) const {
  const int d = dim_;
  if (kind_ == Kind::euclidean) {
    for (int i = 0; i < d * d * d; ++i) Gam[i] = 0.0;
    for (int i = 0; i < d * d * d * d; ++i) dGam[i] = 0.0;
    for (int i = 0; i < d * d * d * d * d; ++i) ddGam[i] = 0.0;
    return;
  }
  Jet3 jets[9];
  metric_jets(x, 3, jets);
  double g[9], ginv[9];
  for (int i = 0; i < d * d; ++i) g[i] = jets[i].value;
  if (!smallmat::invert(d, g, ginv))
    throw std::runtime_error("metric is singular at evaluation point");

  double dg[3][9], dginv[3][9];
  for (int l = 0; l < d; ++l) {
    double t1[9];
    for (int i = 0; i < d * d; ++i) dg[l][i] = jets[i].grad[l];
    smallmat::matmul(d, ginv, dg[l], t1);
    smallmat::matmul(d, t1, ginv, dginv[l]);
    for (int i = 0; i < d * d; ++i) dginv[l][i] = -dginv[l][i];
  }
  // dd ginv[e][m] = -(dginv[e] dg[m] ginv + ginv ddg[e][m] ginv
  //                  + ginv dg[m] dginv[e])
  double ddginv[3][3][9];
  for (int e = 0; e < d; ++e)
    for (int m = 0; m < d; ++m) {
      double ddg[9], t1[9], t2[9], acc[9];
      for (int i = 0; i < d * d; ++i) ddg[i] = jets[i].hess[e][m];
      smallmat::matmul(d, dginv[e], dg[m], t1);
      smallmat::matmul(d, t1, ginv, acc);
      smallmat::matmul(d, ginv, ddg, t1);
      smallmat::matmul(d, t1, ginv, t2);
      for (int i = 0; i < d * d; ++i) acc[i] += t2[i];
      smallmat::matmul(d, ginv, dg[m], t1);
      smallmat::matmul(d, t1, dginv[e], t2);
      for (int i = 0; i < d * d; ++i) acc[i] += t2[i];
      for (int i = 0; i < d * d; ++i) ddginv[e][m][i] = -acc[i];
    }

  // p[l][i][j] = (d_i g_jl + d_j g_il - d_l g_ij) / 2 and its derivatives
  auto p0 = [&](int l, int i, int j) {
    return 0.5 * (jets[j * d + l].grad[i] + jets[i * d + l].grad[j] -
                  jets[i * d + j].grad[l]);
  };
  auto p1 = [&](int m, int l, int i, int j) {
    return 0.5 * (jets[j * d + l].hess[m][i] + jets[i * d + l].hess[m][j] -
                  jets[i * d + j].hess[m][l]);
  };
  auto p2 = [&](int e, int m, int l, int i, int j) {
    return 0.5 *
           (jets[j * d + l].third[e][m][i] + jets[i * d + l].third[e][m][j] -
            jets[i * d + j].third[e][m][l]);
  };

  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += ginv[k * d + l] * p0(l, i, j);
        Gam[(k * d + i) * d + j] = s;
      }
  for (int m = 0; m < d; ++m)
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int l = 0; l < d; ++l)
            s += dginv[m][k * d + l] * p0(l, i, j) +
                 ginv[k * d + l] * p1(m, l, i, j);
          dGam[((m * d + k) * d + i) * d + j] = s;
        }
  for (int e = 0; e < d; ++e)
    for (int m = 0; m < d; ++m)
      for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int l = 0; l < d; ++l)
              s += ddginv[e][m][k * d + l] * p0(l, i, j) +
                   dginv[m][k * d + l] * p1(e, l, i, j) +
                   dginv[e][k * d + l] * p1(m, l, i, j) +
                   ginv[k * d + l] * p2(e, m, l, i, j);
            ddGam[(((e * d + m) * d + k) * d + i) * d + j] = s;
          }
}

void MetricChart::ricci(const double* x, double* Ric) const {
  const int d = dim_;
  if (kind_ == Kind::euclidean) {
    for (int i = 0; i < d * d; ++i) Ric[i] = 0.0;
    return;
  }
  double Gam[27], dGam[81];
  christoffel_d(x, Gam, dGam);
  auto G = [&](int k, int i, int j) { return Gam[(k * d + i) * d + j]; };
  auto dG = [&](int l, int k, int i, int j) {
    return dGam[((l * d + k) * d + i) * d + j];
  };
  // Ric_ij = d_k Gamma^k_ij - d_i Gamma^k_kj
  //        + Gamma^k_kl Gamma^l_ij - Gamma^k_il Gamma^l_kj
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        s += dG(k, k, i, j) - dG(i, k, k, j);
        for (int l = 0; l < d; ++l)
          s += G(k, k, l) * G(l, i, j) - G(k, i, l) * G(l, k, j);
      }
      Ric[i * d + j] = s;
    }
}

void MetricChart::validate_spd(const double* lo, const double* hi,
                               int samples) const {
  const int d = dim_;
  std::mt19937_64 rng(0x9d2c5680u);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int s = 0; s <= samples; ++s) {
    double x[3] = {0, 0, 0};
    for (int k = 0; k < d; ++k) {
      double t = s == 0 ? 0.5 : u01(rng);
      x[k] = lo[k] + t * (hi[k] - lo[k]);
    }
    double g[9];
    metric(x, g);
    double asym = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        asym = std::max(asym, std::abs(g[i * d + j] - g[j * d + i]));
    double scale = 0.0;
    for (int i = 0; i < d * d; ++i) scale = std::max(scale, std::abs(g[i]));
    double w[3];
    smallmat::sym_eigvals(d, g, w);
    if (asym > 1e-12 * std::max(1.0, scale) || w[0] <= 0.0) {
      std::string pt = "(";
      for (int k = 0; k < d; ++k)
        pt += (k ? ", " : "") + std::to_string(x[k]);
      pt += ")";
      throw std::runtime_error(
          "metric is not symmetric positive definite at " + pt);
    }
  }
}

} // namespace pmc
