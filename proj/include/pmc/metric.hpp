#pragma once

// A Riemannian metric on a coordinate box in R^d, d in {2, 3}, with the
// pointwise curvature quantities the solver needs: Christoffel symbols,
// their first derivatives, and the Ricci tensor. All derivatives come from
// exact expression jets, not finite differences.

#include "pmc/expr.hpp"

#include <string>
#include <vector>

namespace pmc {

class MetricChart {
 public:
  static MetricChart euclidean(int dim);

  // g_ij = factor(x)^2 delta_ij.
  static MetricChart conformal(int dim, Expr factor);

  // g_ii given per coordinate, off-diagonal zero.
  static MetricChart diagonal(int dim, std::vector<Expr> diag);

  // Full row-major d*d entry list. Symmetry is the caller's contract and
  // is checked numerically by validate_spd.
  static MetricChart general(int dim, std::vector<Expr> entries);

  int dim() const { return dim_; }
  bool is_euclidean() const { return kind_ == Kind::euclidean; }

  // g_ij(x), row-major d*d.
  void metric(const double* x, double* g) const;

  // Jets of every component through the given order (0..3), row-major.
  void metric_jets(const double* x, int order, Jet3* jets) const;

  // Gam[k][i][j] = Gamma^k_ij(x).
  void christoffel(const double* x, double* Gam) const;

  // Christoffel symbols plus dGam[l][k][i][j] = d_l Gamma^k_ij(x).
  void christoffel_d(const double* x, double* Gam, double* dGam) const;

  // As christoffel_d, plus ddGam[e][m][k][i][j] = d_e d_m Gamma^k_ij(x),
  // assembled from third-order metric jets. Drives the second-variation
  // equation behind analytic gbar derivatives.
  void christoffel_dd(const double* x, double* Gam, double* dGam,
                      double* ddGam) const;

  // Ricci tensor Ric[i][j], with the sign fixed so the round sphere has
  // positive Ricci curvature.
  void ricci(const double* x, double* Ric) const;

  // Sample the box [lo, hi]^d at `samples` pseudo-random points (fixed
  // seed) plus the center and throw std::runtime_error naming the first
  // point where g fails to be symmetric positive definite.
  void validate_spd(const double* lo, const double* hi, int samples) const;

 private:
  enum class Kind { euclidean, conformal, diagonal, general };

  MetricChart(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  std::vector<Expr> exprs_;  // conformal: 1 entry; diagonal: d; general: d*d
};

} // namespace pmc
