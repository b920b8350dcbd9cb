#pragma once

// Mean curvature of perturbed leaf spheres and the restriction of the
// prescription function to them, both in the rescaled picture: the leaf
// is the radial graph Phi(x) = (1 - r^2 u(x)) x over S^n in the normal
// coordinates carried by a RescaledMetric, and H is the sum of principal
// curvatures of that graph with respect to gbar, oriented so the round
// sphere in a flat chart has H = n. This matches r times the mean
// curvature of the actual small sphere under the ambient metric.

#include "pmc/expr.hpp"
#include "pmc/geodesic.hpp"
#include "pmc/sphere.hpp"

#include <vector>

namespace pmc {

// H[r, tau, r^2 u] at the grid nodes; u is given by harmonic coefficients.
// Throws std::runtime_error when the graph guard
// r^2 (|u|_inf + |grad u|_inf) < 0.1 fails.
std::vector<double> mean_curvature(const RescaledMetric& gm,
                                   const SphereGrid& grid,
                                   const double* u_coeffs);

// F[r, tau, r^2 u] at the nodes: f evaluated at the deformed surface
// points exp_c(r (1 - r^2 u) x^i e_i).
std::vector<double> f_restriction(const RescaledMetric& gm,
                                  const SphereGrid& grid, const Expr& f,
                                  const double* u_coeffs);

// Covariant derivatives of f at the leaf center in the transported frame:
// grad[i] = e_i f, hess[i][j] = (nabla^2 f)(e_i, e_j), and
// third[l][i][j] = (nabla^3 f)(e_l; e_i, e_j) = (nabla_{e_l} nabla^2 f)(e_i, e_j).
struct FrameDerivs {
  int dim = 0;
  double fval = 0.0;
  double grad[3] = {};
  double hess[9] = {};
  double third[27] = {};
};
FrameDerivs covariant_frame_derivs(const RescaledMetric& gm, const Expr& f,
                                   int order);

// Sup-norm residuals of the order-r^2 expansions at a single radius, all
// evaluated about tau = 0:
//   H[r,0,r^2 u]    = n + r^2 ((Delta + n) u - 1/3 Ric_ij x^i x^j) + O(r^3)
//   F[r,0]          = f(p) + r e_i f x^i + r^2/2 e_i e_j f x^i x^j + O(r^3)
//   d/dtau_l F[r,0] = e_l f + r e_l e_i f x^i
//                     + r^2/2 e_l e_i e_j f x^i x^j + O(r^3)
// The tau-derivative on the left is formed from central differences of
// F[r, tau] with Richardson extrapolation.
struct ExpansionResiduals {
  double h_resid = 0.0;
  double f_resid = 0.0;
  double ftau_resid = 0.0;
};
ExpansionResiduals expansion_residuals(const MetricChart& chart,
                                       const double* p, const Frame& frame,
                                       const Expr& f, const SphereGrid& grid,
                                       const double* u_coeffs, double r);

} // namespace pmc
