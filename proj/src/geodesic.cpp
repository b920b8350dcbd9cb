#include "pmc/geodesic.hpp"

#include "pmc/smallmat.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>

namespace pmc {

namespace {

constexpr int kMaxState = 60;  // x, v, J, K plus second variations at d = 3

// One RK4 integration of y' = rhs(y) over t in [0, 1] with n steps.
template <class Rhs>
void rk4(Rhs&& rhs, double* y, int m, int n) {
  double k1[kMaxState], k2[kMaxState], k3[kMaxState], k4[kMaxState];
  double tmp[kMaxState];
  const double h = 1.0 / n;
  for (int s = 0; s < n; ++s) {
    rhs(y, k1);
    for (int i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (int i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (int i = 0; i < m; ++i) tmp[i] = y[i] + h * k3[i];
    rhs(tmp, k4);
    for (int i = 0; i < m; ++i)
      y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

// Richardson-extrapolated endpoint: integrate with n and 2n steps, combine
// (16 y_2n - y_n) / 15, and report max |y_2n - y_n| / 15 over the first
// `errdim` components as the error estimate.
template <class Rhs>
double rk4_extrap(Rhs&& rhs, double* y, int m, int n, int errdim) {
  double y1[kMaxState], y2[kMaxState];
  std::memcpy(y1, y, sizeof(double) * m);
  std::memcpy(y2, y, sizeof(double) * m);
  rk4(rhs, y1, m, n);
  rk4(rhs, y2, m, 2 * n);
  double err = 0.0;
  for (int i = 0; i < m; ++i) {
    y[i] = (16.0 * y2[i] - y1[i]) / 15.0;
    if (i < errdim) err = std::max(err, std::abs(y2[i] - y1[i]) / 15.0);
  }
  return err;
}

int auto_steps(double len) {
  if (!(len > 0.0)) return 16;
  return std::max(16, (int)std::ceil(len / 4e-3));
}

double metric_norm(const MetricChart& chart, const double* p,
                   const double* v) {
  const int d = chart.dim();
  double g[9];
  chart.metric(p, g);
  double s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s += g[i * d + j] * v[i] * v[j];
  return std::sqrt(std::max(0.0, s));
}

// Endpoint of exp_c(w) with the Jacobi fields J_i (rates dirs_i) and the
// mixed second variations M_p = d/ds|0 J_i along the geodesic with initial
// velocity w + s dirs_k, stored for pairs p = (k,i), k <= i (symmetric by
// equality of mixed partials). The M equation is the once-more
// differentiated Jacobi equation and needs second Christoffel derivatives.
struct Jac2End {
  double x[3] = {};
  double J[9] = {};
  double M[18] = {};  // row p = M for pair p
  double err = 0.0;
};

Jac2End exp_jacobi2(const MetricChart& chart, const double* c,
                    const double* w, const double* dirs, int nsteps) {
  const int d = chart.dim();
  const int npair = d * (d + 1) / 2;
  int pk[6], pi[6];
  {
    int np = 0;
    for (int k = 0; k < d; ++k)
      for (int i = k; i < d; ++i) {
        pk[np] = k;
        pi[np] = i;
        ++np;
      }
  }
  Jac2End end;
  double len = metric_norm(chart, c, w);
  if (len == 0.0) {
    for (int i = 0; i < d; ++i) end.x[i] = c[i];
    for (int i = 0; i < d * d; ++i) end.J[i] = dirs[i];
    return end;
  }
  int n = nsteps > 0 ? nsteps : auto_steps(len);
  const int oJ = 2 * d, oK = oJ + d * d, oM = oK + d * d,
            oMd = oM + npair * d;
  const int m = oMd + npair * d;
  double y[kMaxState];
  for (int i = 0; i < m; ++i) y[i] = 0.0;
  for (int i = 0; i < d; ++i) y[i] = c[i];
  for (int i = 0; i < d; ++i) y[d + i] = w[i];
  for (int i = 0; i < d * d; ++i) y[oK + i] = dirs[i];
  auto rhs = [&](const double* s, double* ds) {
    double Gam[27], dGam[81], ddGam[243];
    chart.christoffel_dd(s, Gam, dGam, ddGam);
    const double* v = s + d;
    const double* J = s + oJ;
    const double* K = s + oK;
    const double* M = s + oM;
    const double* Md = s + oMd;
    auto G = [&](int a, int b, int cc) { return Gam[(a * d + b) * d + cc]; };
    auto dG = [&](int e, int a, int b, int cc) {
      return dGam[((e * d + a) * d + b) * d + cc];
    };
    auto ddG = [&](int e, int f, int a, int b, int cc) {
      return ddGam[(((e * d + f) * d + a) * d + b) * d + cc];
    };
    for (int i = 0; i < d; ++i) ds[i] = v[i];
    for (int a = 0; a < d; ++a) {
      double acc = 0.0;
      for (int b = 0; b < d; ++b)
        for (int cc = 0; cc < d; ++cc) acc += G(a, b, cc) * v[b] * v[cc];
      ds[d + a] = -acc;
    }
    for (int i = 0; i < d * d; ++i) ds[oJ + i] = K[i];
    for (int i = 0; i < d; ++i)
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b < d; ++b)
          for (int cc = 0; cc < d; ++cc) {
            double vv = v[b] * v[cc];
            for (int e = 0; e < d; ++e)
              acc += dG(e, a, b, cc) * J[i * d + e] * vv;
            acc += 2.0 * G(a, b, cc) * v[b] * K[i * d + cc];
          }
        ds[oK + i * d + a] = -acc;
      }
    for (int i = 0; i < npair * d; ++i) ds[oM + i] = Md[i];
    for (int p = 0; p < npair; ++p) {
      const double* Jk = J + pk[p] * d;
      const double* Ji = J + pi[p] * d;
      const double* Kk = K + pk[p] * d;
      const double* Ki = K + pi[p] * d;
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b < d; ++b)
          for (int cc = 0; cc < d; ++cc) {
            double vv = v[b] * v[cc];
            for (int e = 0; e < d; ++e) {
              for (int f = 0; f < d; ++f)
                acc += ddG(e, f, a, b, cc) * Jk[e] * Ji[f] * vv;
              acc += dG(e, a, b, cc) * M[p * d + e] * vv;
            }
            for (int e = 0; e < d; ++e)
              acc += 2.0 * dG(e, a, b, cc) *
                     (Ji[e] * Kk[b] + Jk[e] * Ki[b]) * v[cc];
            acc += 2.0 * G(a, b, cc) *
                   (Md[p * d + b] * v[cc] + Ki[b] * Kk[cc]);
          }
        ds[oMd + p * d + a] = -acc;
      }
    }
  };
  end.err = rk4_extrap(rhs, y, m, n, d);
  for (int i = 0; i < d; ++i) end.x[i] = y[i];
  for (int i = 0; i < d * d; ++i) end.J[i] = y[oJ + i];
  for (int i = 0; i < npair * d; ++i) end.M[i] = y[oM + i];
  return end;
}

} // namespace

Frame orthonormal_frame(const MetricChart& chart, const double* p) {
  const int d = chart.dim();
  double g[9];
  chart.metric(p, g);
  auto ip = [&](const double* a, const double* b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += g[i * d + j] * a[i] * b[j];
    return s;
  };
  Frame f;
  f.dim = d;
  for (int i = 0; i < d; ++i) {
    double w[3] = {0, 0, 0};
    w[i] = 1.0;
    for (int j = 0; j < i; ++j) {
      double c = ip(w, f.e + j * d);
      for (int k = 0; k < d; ++k) w[k] -= c * f.e[j * d + k];
    }
    double nrm = std::sqrt(ip(w, w));
    if (!(nrm > 0.0))
      throw std::runtime_error("degenerate metric: frame construction failed");
    for (int k = 0; k < d; ++k) f.e[i * d + k] = w[k] / nrm;
  }
  return f;
}

Frame rotate_frame(const Frame& f, const double* R) {
  const int d = f.dim;
  Frame out;
  out.dim = d;
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += R[i * d + j] * f.e[j * d + k];
      out.e[i * d + k] = s;
    }
  return out;
}

GeodesicEnd exp_map(const MetricChart& chart, const double* p,
                    const double* v, int nsteps) {
  const int d = chart.dim();
  GeodesicEnd end;
  if (chart.is_euclidean()) {
    for (int i = 0; i < d; ++i) end.x[i] = p[i] + v[i];
    for (int i = 0; i < d; ++i) end.v[i] = v[i];
    return end;
  }
  double len = metric_norm(chart, p, v);
  if (len == 0.0) {
    for (int i = 0; i < d; ++i) end.x[i] = p[i];
    return end;
  }
  int n = nsteps > 0 ? nsteps : auto_steps(len);
  double y[kMaxState];
  for (int i = 0; i < d; ++i) y[i] = p[i];
  for (int i = 0; i < d; ++i) y[d + i] = v[i];
  auto rhs = [&](const double* s, double* ds) {
    double Gam[27];
    chart.christoffel(s, Gam);
    for (int i = 0; i < d; ++i) ds[i] = s[d + i];
    for (int a = 0; a < d; ++a) {
      double acc = 0.0;
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          acc += Gam[(a * d + b) * d + c] * s[d + b] * s[d + c];
      ds[d + a] = -acc;
    }
  };
  end.err = rk4_extrap(rhs, y, 2 * d, n, d);
  for (int i = 0; i < d; ++i) end.x[i] = y[i];
  for (int i = 0; i < d; ++i) end.v[i] = y[d + i];
  return end;
}

JacobiEnd exp_with_jacobi(const MetricChart& chart, const double* c,
                          const double* w, const double* dirs, int nsteps) {
  const int d = chart.dim();
  JacobiEnd end;
  if (chart.is_euclidean()) {
    for (int i = 0; i < d; ++i) end.x[i] = c[i] + w[i];
    for (int i = 0; i < d * d; ++i) end.J[i] = dirs[i];
    return end;
  }
  double len = metric_norm(chart, c, w);
  if (len == 0.0) {
    for (int i = 0; i < d; ++i) end.x[i] = c[i];
    for (int i = 0; i < d * d; ++i) end.J[i] = dirs[i];
    return end;
  }
  int n = nsteps > 0 ? nsteps : auto_steps(len);
  // state: x(d), v(d), J(d*d), K(d*d) with K = dJ/dt
  const int m = 2 * d + 2 * d * d;
  double y[kMaxState];
  for (int i = 0; i < d; ++i) y[i] = c[i];
  for (int i = 0; i < d; ++i) y[d + i] = w[i];
  for (int i = 0; i < d * d; ++i) y[2 * d + i] = 0.0;
  for (int i = 0; i < d * d; ++i) y[2 * d + d * d + i] = dirs[i];
  auto rhs = [&](const double* s, double* ds) {
    double Gam[27], dGam[81];
    chart.christoffel_d(s, Gam, dGam);
    const double* v = s + d;
    const double* J = s + 2 * d;
    const double* K = s + 2 * d + d * d;
    for (int i = 0; i < d; ++i) ds[i] = v[i];
    for (int a = 0; a < d; ++a) {
      double acc = 0.0;
      for (int b = 0; b < d; ++b)
        for (int cc = 0; cc < d; ++cc)
          acc += Gam[(a * d + b) * d + cc] * v[b] * v[cc];
      ds[d + a] = -acc;
    }
    // dJ_i/dt = K_i
    for (int i = 0; i < d * d; ++i) ds[2 * d + i] = K[i];
    // dK_i^a/dt = -dGam^a_bc,e J_i^e v^b v^c - 2 Gam^a_bc v^b K_i^c
    for (int i = 0; i < d; ++i)
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b < d; ++b)
          for (int cc = 0; cc < d; ++cc) {
            double vv = v[b] * v[cc];
            for (int e = 0; e < d; ++e)
              acc += dGam[((e * d + a) * d + b) * d + cc] * J[i * d + e] * vv;
            acc += 2.0 * Gam[(a * d + b) * d + cc] * v[b] * K[i * d + cc];
          }
        ds[2 * d + d * d + i * d + a] = -acc;
      }
  };
  end.err = rk4_extrap(rhs, y, m, n, d);
  for (int i = 0; i < d; ++i) end.x[i] = y[i];
  for (int i = 0; i < d * d; ++i) end.J[i] = y[2 * d + i];
  return end;
}

TransportEnd parallel_transport(const MetricChart& chart, const double* p,
                                const double* v, const double* vecs, int nvec,
                                int nsteps) {
  const int d = chart.dim();
  TransportEnd end;
  if (chart.is_euclidean()) {
    for (int i = 0; i < d; ++i) end.x[i] = p[i] + v[i];
    for (int i = 0; i < nvec * d; ++i) end.vecs[i] = vecs[i];
    return end;
  }
  double len = metric_norm(chart, p, v);
  if (len == 0.0) {
    for (int i = 0; i < d; ++i) end.x[i] = p[i];
    for (int i = 0; i < nvec * d; ++i) end.vecs[i] = vecs[i];
    return end;
  }
  int n = nsteps > 0 ? nsteps : auto_steps(len);
  const int m = 2 * d + nvec * d;
  double y[kMaxState];
  for (int i = 0; i < d; ++i) y[i] = p[i];
  for (int i = 0; i < d; ++i) y[d + i] = v[i];
  for (int i = 0; i < nvec * d; ++i) y[2 * d + i] = vecs[i];
  auto rhs = [&](const double* s, double* ds) {
    double Gam[27];
    chart.christoffel(s, Gam);
    const double* vel = s + d;
    for (int i = 0; i < d; ++i) ds[i] = vel[i];
    for (int a = 0; a < d; ++a) {
      double acc = 0.0;
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          acc += Gam[(a * d + b) * d + c] * vel[b] * vel[c];
      ds[d + a] = -acc;
    }
    for (int k = 0; k < nvec; ++k)
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b < d; ++b)
          for (int c = 0; c < d; ++c)
            acc += Gam[(a * d + b) * d + c] * vel[b] * s[2 * d + k * d + c];
        ds[2 * d + k * d + a] = -acc;
      }
  };
  rk4_extrap(rhs, y, m, n, d);
  for (int i = 0; i < d; ++i) end.x[i] = y[i];
  for (int i = 0; i < nvec * d; ++i) end.vecs[i] = y[2 * d + i];

  // Gram drift: inner products against the local metric must be preserved.
  double g0[9], g1[9];
  chart.metric(p, g0);
  chart.metric(end.x, g1);
  auto gram = [&](const double* g, const double* w, int i, int j) {
    double s = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        s += g[a * d + b] * w[i * d + a] * w[j * d + b];
    return s;
  };
  for (int i = 0; i < nvec; ++i)
    for (int j = 0; j < nvec; ++j)
      end.drift = std::max(end.drift, std::abs(gram(g1, end.vecs, i, j) -
                                               gram(g0, vecs, i, j)));
  if (end.drift > 1e-8)
    throw std::runtime_error("parallel transport lost orthonormality");
  return end;
}

RescaledMetric::RescaledMetric(const MetricChart& chart, const double* p,
                               const Frame& frame)
    : chart_(&chart), frame_p_(frame) {
  const int d = chart.dim();
  if (frame.dim != d)
    throw std::invalid_argument("frame dimension mismatch");
  for (int i = 0; i < d; ++i) p_[i] = p[i];
  for (int i = 0; i < d; ++i) center_[i] = p[i];
  frame_tau_ = frame;
}

void RescaledMetric::set_leaf(double r, const double* tau) {
  const int d = chart_->dim();
  if (!(r >= 0.0)) throw std::invalid_argument("leaf radius must be >= 0");
  r_ = r;
  double tnorm = 0.0;
  if (tau)
    for (int i = 0; i < d; ++i) tnorm += tau[i] * tau[i];
  if (tnorm == 0.0) {
    for (int i = 0; i < d; ++i) center_[i] = p_[i];
    frame_tau_ = frame_p_;
    return;
  }
  // velocity of the center geodesic in chart components
  double v[3] = {0, 0, 0};
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) v[a] += tau[i] * frame_p_.e[i * d + a];
  TransportEnd t = parallel_transport(*chart_, p_, v, frame_p_.e, d);
  for (int i = 0; i < d; ++i) center_[i] = t.x[i];
  frame_tau_.dim = d;
  for (int i = 0; i < d * d; ++i) frame_tau_.e[i] = t.vecs[i];
}

void RescaledMetric::gbar_at(const double* x, int nsteps, double* g) const {
  const int d = chart_->dim();
  if (chart_->is_euclidean()) {
    for (int i = 0; i < d * d; ++i) g[i] = 0.0;
    for (int i = 0; i < d; ++i) g[i * d + i] = 1.0;
    return;
  }
  double xnorm = 0.0;
  for (int i = 0; i < d; ++i) xnorm += x[i] * x[i];
  xnorm = std::sqrt(xnorm);
  if (r_ * xnorm < 1e-300) {
    // gbar(0) is the Gram matrix of the orthonormal frame: the identity.
    for (int i = 0; i < d * d; ++i) g[i] = 0.0;
    for (int i = 0; i < d; ++i) g[i * d + i] = 1.0;
    return;
  }
  // w = r x^k e_k in chart components
  double w[3] = {0, 0, 0};
  for (int k = 0; k < d; ++k)
    for (int a = 0; a < d; ++a) w[a] += r_ * x[k] * frame_tau_.e[k * d + a];
  JacobiEnd je =
      exp_with_jacobi(*chart_, center_, w, frame_tau_.e, nsteps);
  double gm[9];
  chart_->metric(je.x, gm);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          s += gm[a * d + b] * je.J[i * d + a] * je.J[j * d + b];
      g[i * d + j] = s;
    }
}

void RescaledMetric::gbar(const double* x, double* g) const {
  gbar_at(x, 0, g);
}

void RescaledMetric::gbar_d(const double* x, double* g, double* dg) const {
  const int d = chart_->dim();
  if (chart_->is_euclidean()) {
    for (int i = 0; i < d * d; ++i) g[i] = 0.0;
    for (int i = 0; i < d; ++i) g[i * d + i] = 1.0;
    for (int i = 0; i < d * d * d; ++i) dg[i] = 0.0;
    return;
  }
  double xnorm = 0.0;
  for (int i = 0; i < d; ++i) xnorm += x[i] * x[i];
  xnorm = std::sqrt(xnorm);
  if (r_ * xnorm < 1e-300) {
    // Normal coordinates: gbar(0) is the identity and, because the frame
    // is parallel along radial geodesics, the first derivatives vanish.
    for (int i = 0; i < d * d; ++i) g[i] = 0.0;
    for (int i = 0; i < d; ++i) g[i * d + i] = 1.0;
    for (int i = 0; i < d * d * d; ++i) dg[i] = 0.0;
    return;
  }
  double w[3] = {0, 0, 0};
  for (int k = 0; k < d; ++k)
    for (int a = 0; a < d; ++a) w[a] += r_ * x[k] * frame_tau_.e[k * d + a];
  Jac2End je = exp_jacobi2(*chart_, center_, w, frame_tau_.e, 0);
  auto pair_idx = [d](int k, int i) {
    if (k > i) std::swap(k, i);
    return k * d - k * (k + 1) / 2 + i;
  };
  Jet3 jets[9];
  chart_->metric_jets(je.x, 1, jets);
  double gm[9], dgm[27];
  for (int i = 0; i < d * d; ++i) gm[i] = jets[i].value;
  for (int c = 0; c < d; ++c)
    for (int i = 0; i < d * d; ++i) dgm[c * d * d + i] = jets[i].grad[c];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          s += gm[a * d + b] * je.J[i * d + a] * je.J[j * d + b];
      g[i * d + j] = s;
    }
  // d_k gbar_ij = r [ d_c g_ab J_k^c J_i^a J_j^b
  //                   + g_ab (M_ki^a J_j^b + J_i^a M_kj^b) ]
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double* Mki = je.M + pair_idx(k, i) * d;
        const double* Mkj = je.M + pair_idx(k, j) * d;
        double s = 0.0;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) {
            double JiJj = je.J[i * d + a] * je.J[j * d + b];
            for (int c = 0; c < d; ++c)
              s += dgm[c * d * d + a * d + b] * je.J[k * d + c] * JiJj;
            s += gm[a * d + b] *
                 (Mki[a] * je.J[j * d + b] + je.J[i * d + a] * Mkj[b]);
          }
        dg[k * d * d + i * d + j] = r_ * s;
      }
}

void RescaledMetric::gbar_d_fd(const double* x, double* g, double* dg) const {
  const int d = chart_->dim();
  const double h = fd_step();
  // One step count for the whole stencil cluster, sized by its outermost
  // point, so the finite differences see a smooth function of x.
  double xnorm = 0.0;
  for (int i = 0; i < d; ++i) xnorm += x[i] * x[i];
  xnorm = std::sqrt(xnorm);
  int n = auto_steps(r_ * (xnorm + 2.0 * h));
  gbar_at(x, n, g);
  for (int k = 0; k < d; ++k) {
    double xp[3], gp1[9], gm1[9], gp2[9], gm2[9];
    for (int i = 0; i < d; ++i) xp[i] = x[i];
    xp[k] = x[k] + h;
    gbar_at(xp, n, gp1);
    xp[k] = x[k] - h;
    gbar_at(xp, n, gm1);
    xp[k] = x[k] + 2.0 * h;
    gbar_at(xp, n, gp2);
    xp[k] = x[k] - 2.0 * h;
    gbar_at(xp, n, gm2);
    for (int i = 0; i < d * d; ++i)
      dg[k * d * d + i] =
          (gm2[i] - 8.0 * gm1[i] + 8.0 * gp1[i] - gp2[i]) / (12.0 * h);
  }
}

void RescaledMetric::frame_ricci(double* ric) const {
  const int d = chart_->dim();
  double R[9];
  chart_->ricci(center_, R);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          s += R[a * d + b] * frame_tau_.e[i * d + a] * frame_tau_.e[j * d + b];
      ric[i * d + j] = s;
    }
}

} // namespace pmc
