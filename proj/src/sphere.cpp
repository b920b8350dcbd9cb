#include "pmc/sphere.hpp"

#include "pmc/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pmc {

namespace {

// Gauss-Legendre nodes (ascending colatitude, i.e. descending x) and
// weights on [-1, 1] by Newton iteration on the recurrence.
void gauss_legendre(int nq, std::vector<double>& x, std::vector<double>& w) {
  x.resize(nq);
  w.resize(nq);
  for (int i = 0; i < nq; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (nq + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < nq; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = nq * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

// Associated Legendre values P_l^m(cos th) for one theta, all l <= L,
// without the Condon-Shortley phase, plus the first two theta derivatives
// of Theta(th) = P_l^m(cos th). Output arrays are indexed [m * (L+1) + l].
void legendre_table(int L, double th, std::vector<double>& P,
                    std::vector<double>& dP, std::vector<double>& ddP) {
  const double x = std::cos(th), s = std::sin(th);
  const int stride = L + 1;
  P.assign(stride * stride, 0.0);
  dP.assign(stride * stride, 0.0);
  ddP.assign(stride * stride, 0.0);
  for (int m = 0; m <= L; ++m) {
    // P_m^m = (2m-1)!! s^m
    double pmm = 1.0;
    for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0) * s;
    P[m * stride + m] = pmm;
    if (m + 1 <= L) P[m * stride + m + 1] = x * (2.0 * m + 1.0) * pmm;
    for (int l = m + 2; l <= L; ++l)
      P[m * stride + l] = ((2.0 * l - 1.0) * x * P[m * stride + l - 1] -
                           (l - 1.0 + m) * P[m * stride + l - 2]) /
                          (l - m);
    for (int l = m; l <= L; ++l) {
      double Plm = P[m * stride + l];
      double Pl1 = l - 1 >= m ? P[m * stride + l - 1] : 0.0;
      // (1 - x^2) dP/dx = (l+m) P_{l-1}^m - l x P_l^m
      double dth = -((l + m) * Pl1 - l * x * Plm) / s;
      dP[m * stride + l] = dth;
      // Legendre ODE: Theta'' = -cot th Theta' - (l(l+1) - m^2/s^2) Theta
      ddP[m * stride + l] =
          -(x / s) * dth - (l * (l + 1.0) - (double)m * m / (s * s)) * Plm;
    }
  }
}

} // namespace

double sphere_area(int n) { return n == 1 ? 2.0 * M_PI : 4.0 * M_PI; }

double sphere_moment(int n, const int* alpha) {
  double sum_b = 0.0, lg = 0.0;
  for (int j = 0; j <= n; ++j) {
    if (alpha[j] < 0) throw std::invalid_argument("negative moment exponent");
    if (alpha[j] % 2 == 1) return 0.0;
    double b = (alpha[j] + 1.0) / 2.0;
    sum_b += b;
    lg += std::lgamma(b);
  }
  return 2.0 * std::exp(lg - std::lgamma(sum_b));
}

SphereGrid::SphereGrid(int n, int L) : n_(n), L_(L) {
  if (n != 1 && n != 2)
    throw std::invalid_argument("sphere dimension must be 1 or 2");
  if (L < 1 || L > 64) throw std::invalid_argument("band limit out of range");

  if (n == 1) {
    nnodes_ = 4 * L + 1;
    ncoef_ = 2 * L + 1;
    theta_.resize(nnodes_);
    w_.assign(nnodes_, 2.0 * M_PI / nnodes_);
    for (int i = 0; i < nnodes_; ++i) theta_[i] = 2.0 * M_PI * i / nnodes_;
    deg_.resize(ncoef_);
    deg_[0] = 0;
    for (int l = 1; l <= L; ++l) deg_[2 * l - 1] = deg_[2 * l] = l;
  } else {
    const int nth = L + 1, nph = 2 * L + 1;
    nnodes_ = nth * nph;
    ncoef_ = (L + 1) * (L + 1);
    std::vector<double> gx, gw;
    gauss_legendre(nth, gx, gw);
    theta_.resize(nnodes_);
    phi_.resize(nnodes_);
    w_.resize(nnodes_);
    for (int it = 0; it < nth; ++it)
      for (int ip = 0; ip < nph; ++ip) {
        int i = it * nph + ip;
        theta_[i] = std::acos(gx[it]);
        phi_[i] = 2.0 * M_PI * ip / nph;
        w_[i] = gw[it] * 2.0 * M_PI / nph;
      }
    deg_.resize(ncoef_);
    for (int l = 0; l <= L; ++l)
      for (int m = -l; m <= l; ++m) deg_[l * l + m + l] = l;
  }

  B_.resize((size_t)nnodes_ * ncoef_);
  Bth_.resize((size_t)nnodes_ * ncoef_);
  Bthth_.resize((size_t)nnodes_ * ncoef_);
  if (n == 2) {
    Bph_.resize((size_t)nnodes_ * ncoef_);
    Bthph_.resize((size_t)nnodes_ * ncoef_);
    Bphph_.resize((size_t)nnodes_ * ncoef_);
  }
  for (int i = 0; i < nnodes_; ++i) {
    size_t off = (size_t)i * ncoef_;
    basis_row(theta_[i], n == 2 ? phi_[i] : 0.0, &B_[off], &Bth_[off],
              &Bthth_[off], n == 2 ? &Bph_[off] : nullptr,
              n == 2 ? &Bthph_[off] : nullptr,
              n == 2 ? &Bphph_[off] : nullptr);
  }
  A_.resize((size_t)ncoef_ * nnodes_);
  for (int k = 0; k < ncoef_; ++k)
    for (int i = 0; i < nnodes_; ++i)
      A_[(size_t)k * nnodes_ + i] = B_[(size_t)i * ncoef_ + k] * w_[i];
}

void SphereGrid::basis_row(double th, double ph, double* b, double* bth,
                           double* bthth, double* bph, double* bthph,
                           double* bphph) const {
  if (n_ == 1) {
    const double c0 = 1.0 / std::sqrt(2.0 * M_PI);
    const double c1 = 1.0 / std::sqrt(M_PI);
    b[0] = c0;
    if (bth) bth[0] = 0.0;
    if (bthth) bthth[0] = 0.0;
    for (int l = 1; l <= L_; ++l) {
      double sl = std::sin(l * th), cl = std::cos(l * th);
      b[2 * l - 1] = c1 * sl;
      b[2 * l] = c1 * cl;
      if (bth) {
        bth[2 * l - 1] = c1 * l * cl;
        bth[2 * l] = -c1 * l * sl;
      }
      if (bthth) {
        bthth[2 * l - 1] = -c1 * l * l * sl;
        bthth[2 * l] = -c1 * l * l * cl;
      }
    }
    return;
  }

  thread_local std::vector<double> P, dP, ddP;
  legendre_table(L_, th, P, dP, ddP);
  const int stride = L_ + 1;
  const double sqrt2 = std::sqrt(2.0);
  for (int l = 0; l <= L_; ++l)
    for (int m = -l; m <= l; ++m) {
      int k = l * l + m + l;
      int ma = std::abs(m);
      double N = std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) *
                           std::exp(std::lgamma(l - ma + 1.0) -
                                    std::lgamma(l + ma + 1.0)));
      double T = N * P[ma * stride + l];
      double dT = N * dP[ma * stride + l];
      double ddT = N * ddP[ma * stride + l];
      double az, daz;
      if (m > 0) {
        az = sqrt2 * std::cos(m * ph);
        daz = -sqrt2 * m * std::sin(m * ph);
      } else if (m < 0) {
        az = sqrt2 * std::sin(ma * ph);
        daz = sqrt2 * ma * std::cos(ma * ph);
      } else {
        az = 1.0;
        daz = 0.0;
      }
      b[k] = T * az;
      if (bth) bth[k] = dT * az;
      if (bthth) bthth[k] = ddT * az;
      if (bph) bph[k] = T * daz;
      if (bthph) bthph[k] = dT * daz;
      if (bphph) bphph[k] = -(double)m * m * T * az;
    }
}

void SphereGrid::node_omega(int i, double* omega) const {
  if (n_ == 1) {
    omega[0] = std::cos(theta_[i]);
    omega[1] = std::sin(theta_[i]);
  } else {
    double s = std::sin(theta_[i]);
    omega[0] = s * std::cos(phi_[i]);
    omega[1] = s * std::sin(phi_[i]);
    omega[2] = std::cos(theta_[i]);
  }
}

void SphereGrid::analyze(const double* f, double* c) const {
  kernels::matvec(ncoef_, nnodes_, A_.data(), f, c);
}

void SphereGrid::synthesize(const double* c, double* f) const {
  kernels::matvec(nnodes_, ncoef_, B_.data(), c, f);
}

void SphereGrid::synth_dth(const double* c, double* f) const {
  kernels::matvec(nnodes_, ncoef_, Bth_.data(), c, f);
}

void SphereGrid::synth_dthth(const double* c, double* f) const {
  kernels::matvec(nnodes_, ncoef_, Bthth_.data(), c, f);
}

void SphereGrid::synth_dph(const double* c, double* f) const {
  if (n_ != 2) throw std::logic_error("phi derivative needs S^2");
  kernels::matvec(nnodes_, ncoef_, Bph_.data(), c, f);
}

void SphereGrid::synth_dthph(const double* c, double* f) const {
  if (n_ != 2) throw std::logic_error("phi derivative needs S^2");
  kernels::matvec(nnodes_, ncoef_, Bthph_.data(), c, f);
}

void SphereGrid::synth_dphph(const double* c, double* f) const {
  if (n_ != 2) throw std::logic_error("phi derivative needs S^2");
  kernels::matvec(nnodes_, ncoef_, Bphph_.data(), c, f);
}

double SphereGrid::eval(const double* c, double th, double ph) const {
  thread_local std::vector<double> row;
  row.resize(ncoef_);
  basis_row(th, ph, row.data(), nullptr, nullptr, nullptr, nullptr, nullptr);
  return kernels::dot(ncoef_, row.data(), c);
}

void SphereGrid::apply_shifted_laplacian(const double* u, double* out) const {
  std::vector<double> c(ncoef_);
  analyze(u, c.data());
  for (int k = 0; k < ncoef_; ++k) {
    double l = deg_[k];
    c[k] *= n_ - l * (l + n_ - 1.0);
  }
  synthesize(c.data(), out);
}

void SphereGrid::k_components(const double* h, double* b) const {
  thread_local std::vector<double> om;
  om.resize((size_t)(n_ + 1) * nnodes_);
  for (int i = 0; i < nnodes_; ++i) {
    double w[3];
    node_omega(i, w);
    for (int j = 0; j <= n_; ++j) om[(size_t)j * nnodes_ + i] = w[j];
  }
  const double scale = (n_ + 1.0) / sphere_area(n_);
  for (int j = 0; j <= n_; ++j)
    b[j] = scale *
           kernels::dot3(nnodes_, w_.data(), h, om.data() + (size_t)j * nnodes_);
}

void SphereGrid::project_k(const double* h, double* out) const {
  double b[3];
  k_components(h, b);
  for (int i = 0; i < nnodes_; ++i) {
    double w[3];
    node_omega(i, w);
    double s = 0.0;
    for (int j = 0; j <= n_; ++j) s += b[j] * w[j];
    out[i] = s;
  }
}

void SphereGrid::project_k_perp(const double* h, double* out) const {
  std::vector<double> kpart(nnodes_);
  project_k(h, kpart.data());
  for (int i = 0; i < nnodes_; ++i) out[i] = h[i] - kpart[i];
}

void SphereGrid::solve_shifted(const double* h, double* u) const {
  std::vector<double> c(ncoef_);
  analyze(h, c.data());
  double tot = 0.0, kpart = 0.0;
  for (int k = 0; k < ncoef_; ++k) {
    tot += c[k] * c[k];
    if (deg_[k] == 1) kpart += c[k] * c[k];
  }
  if (tot > 0.0 && std::sqrt(kpart) > 1e-9 * std::sqrt(tot))
    throw std::runtime_error(
        "solve_shifted: right-hand side has a component along the "
        "coordinate functions");
  for (int k = 0; k < ncoef_; ++k) {
    double l = deg_[k];
    if (deg_[k] == 1) {
      c[k] = 0.0;
    } else {
      c[k] /= n_ - l * (l + n_ - 1.0);
    }
  }
  synthesize(c.data(), u);
}

} // namespace pmc
