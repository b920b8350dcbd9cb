#pragma once

// Geodesic machinery on a MetricChart: the exponential map, its derivative
// (Jacobi fields), parallel transport, orthonormal frames, and the rescaled
// metric seen by a small geodesic sphere. Integration is classical RK4 run
// at N and 2N steps with Richardson extrapolation of the endpoint, which
// also yields an error estimate.

#include "pmc/metric.hpp"

namespace pmc {

struct Frame {
  int dim = 0;
  double e[9] = {};  // row i = chart components of e_i

  const double* vec(int i) const { return e + i * dim; }
};

// Gram-Schmidt of the coordinate basis against g(p).
Frame orthonormal_frame(const MetricChart& chart, const double* p);

// Relabel by a Euclidean-orthogonal matrix: e'_i = sum_j R[i][j] e_j.
Frame rotate_frame(const Frame& f, const double* R);

struct GeodesicEnd {
  double x[3] = {};
  double v[3] = {};
  double err = 0.0;  // Richardson estimate of the endpoint position error
};

// exp_p(v). nsteps = 0 picks N = max(16, ceil(len / 4e-3)) from the
// geodesic length; a positive value forces that base step count.
GeodesicEnd exp_map(const MetricChart& chart, const double* p,
                    const double* v, int nsteps = 0);

struct JacobiEnd {
  double x[3] = {};
  double J[9] = {};  // row i = J_i(1), the image of dirs_i under d(exp_c)_w
  double err = 0.0;
};

// Endpoint of exp_c(w) together with the Jacobi fields J_i along the
// geodesic, J_i(0) = 0 and (D_t J_i)(0) = dirs_i (row i of dirs, d rows).
JacobiEnd exp_with_jacobi(const MetricChart& chart, const double* c,
                          const double* w, const double* dirs,
                          int nsteps = 0);

struct TransportEnd {
  double x[3] = {};
  double vecs[9] = {};  // row i = transported vector
  double drift = 0.0;   // max Gram-matrix entry change start to end
};

// Parallel transport of nvec vectors along t -> exp_p(t v), t in [0, 1].
// Throws std::runtime_error if the Gram drift exceeds 1e-8.
TransportEnd parallel_transport(const MetricChart& chart, const double* p,
                                const double* v, const double* vecs, int nvec,
                                int nsteps = 0);

// The metric of a small geodesic sphere in normal coordinates: gbar_ij(x)
// are the components at c(tau) of the ambient metric pulled back through
// exp and rescaled by r, so gbar(0) = identity and gbar -> identity as
// r -> 0. Spatial derivatives are integrated analytically alongside the
// Jacobi fields (second variation of exp), which keeps them free of
// finite-difference noise; a 5-point stencil variant is retained as a
// testing oracle.
class RescaledMetric {
 public:
  RescaledMetric(const MetricChart& chart, const double* p,
                 const Frame& frame);

  // Position the leaf: center c(tau) = exp_p(tau^i e_i) and the frame
  // parallel-transported there. tau may be null for tau = 0.
  void set_leaf(double r, const double* tau);

  int dim() const { return chart_->dim(); }
  double r() const { return r_; }
  const double* center() const { return center_; }
  const Frame& frame() const { return frame_tau_; }
  const MetricChart& chart() const { return *chart_; }
  double fd_step() const { return 0.02; }

  // gbar_ij(x), row-major d*d; x is a normal-coordinate point of size O(1).
  void gbar(const double* x, double* g) const;

  // gbar plus dg[k][i][j] = d_k gbar_ij(x), via the second-variation ODE.
  void gbar_d(const double* x, double* g, double* dg) const;

  // Same contract as gbar_d but with 5-point central differences of step
  // fd_step(); kept as an independent oracle for the analytic path.
  void gbar_d_fd(const double* x, double* g, double* dg) const;

  // Ambient Ricci tensor at c(tau) expressed in the transported frame.
  void frame_ricci(double* ric) const;

 private:
  void gbar_at(const double* x, int nsteps, double* g) const;

  const MetricChart* chart_;
  double p_[3] = {};
  Frame frame_p_;
  double r_ = 0.0;
  double center_[3] = {};
  Frame frame_tau_;
};

} // namespace pmc
