#pragma once

// Quadrature grids and real orthonormal harmonic bases on S^1 and S^2,
// plus the spectral operations the reduction needs: analysis/synthesis,
// derivative evaluation at the nodes, the projection onto the span of the
// coordinate functions x^i, and inversion of the shifted Laplacian
// (Delta + n) on the complement of that span.
//
// S^1 (n = 1): 4L+1 equispaced nodes, trapezoid weights, Fourier basis
//   1/sqrt(2pi), sin(l th)/sqrt(pi), cos(l th)/sqrt(pi), l = 1..L,
//   ordered by degree with the sin entry first within each degree.
// S^2 (n = 2): Gauss-Legendre (L+1) x uniform (2L+1) product grid (no
//   polar nodes), real spherical harmonics through degree L ordered by
//   (l, m) with m ascending; m < 0 are the sin(|m| ph) entries. The
//   normalization fixes x^1 = sqrt(4pi/3) Y_{1,1}.
//
// Both quadratures integrate products of two basis functions exactly, so
// the discrete Gram matrix is the identity to roundoff.

#include <vector>

namespace pmc {

double sphere_area(int n);  // |S^n|: 2pi or 4pi

// Closed-form moment of a monomial over S^n: for alpha with n+1 entries,
// the integral of prod_j (w^j)^alpha_j. Zero when any alpha_j is odd,
// otherwise 2 Gamma(b_1)...Gamma(b_{n+1}) / Gamma(b_1 + ... + b_{n+1})
// with b_j = (alpha_j + 1) / 2.
double sphere_moment(int n, const int* alpha);

class SphereGrid {
 public:
  SphereGrid(int n, int L);

  int n() const { return n_; }
  int L() const { return L_; }
  int num_nodes() const { return nnodes_; }
  int num_coeffs() const { return ncoef_; }

  double theta(int i) const { return theta_[i]; }
  double phi(int i) const { return n_ == 1 ? 0.0 : phi_[i]; }
  double weight(int i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }

  // Cartesian coordinates of node i (n+1 components). On S^1 these are
  // (cos th, sin th); on S^2, (sin th cos ph, sin th sin ph, cos th).
  void node_omega(int i, double* omega) const;

  // Harmonic degree l of coefficient index k.
  int deg(int k) const { return deg_[k]; }

  // c = analysis(f): exact for band-limited f. f has num_nodes entries,
  // c num_coeffs.
  void analyze(const double* f, double* c) const;
  void synthesize(const double* c, double* f) const;

  // Derivatives of a coefficient vector at all nodes.
  void synth_dth(const double* c, double* f) const;
  void synth_dthth(const double* c, double* f) const;
  void synth_dph(const double* c, double* f) const;    // n = 2 only
  void synth_dthph(const double* c, double* f) const;  // n = 2 only
  void synth_dphph(const double* c, double* f) const;  // n = 2 only

  // Pointwise evaluation of a coefficient vector at arbitrary angles.
  double eval(const double* c, double th, double ph = 0.0) const;

  // (Delta + n) applied spectrally to a grid function.
  void apply_shifted_laplacian(const double* u, double* out) const;

  // Components of the projection onto K = span{x^1..x^{n+1}} by the
  // moment formula: b_j = ((n+1)/|S^n|) sum_i w_i h_i omega_i^j.
  void k_components(const double* h, double* b) const;
  void project_k(const double* h, double* out) const;
  void project_k_perp(const double* h, double* out) const;

  // Solve (Delta + n) u = h for u with no K component. Requires h to
  // satisfy ||P_K h|| <= 1e-9 ||h||; throws std::runtime_error otherwise.
  void solve_shifted(const double* h, double* u) const;

 private:
  void basis_row(double th, double ph, double* b, double* bth, double* bthth,
                 double* bph, double* bthph, double* bphph) const;

  int n_, L_, nnodes_, ncoef_;
  std::vector<double> theta_, phi_, w_;
  std::vector<int> deg_;
  // nodes x ncoef synthesis matrices; analysis is ncoef x nodes
  std::vector<double> B_, Bth_, Bthth_, Bph_, Bthph_, Bphph_, A_;
};

} // namespace pmc
