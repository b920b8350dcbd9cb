#pragma once

// The Lyapunov-Schmidt engine. A leaf of the family solves
//
//   H[r, tau, r^2 u] = (n / f(p)) F[r, tau]   on S^n,
//
// and the equation is split against K = span{x^1..x^{n+1}}: the inner
// solve drives the K-orthogonal part to zero in u at fixed (r, tau) with
// the frozen model operator (Delta + n), and the outer solve drives the
// K components G(r, tau) to zero in tau, by Newton when Hess f(p) is
// invertible and by Brouwer-degree subdivision when it is only known to
// have nonzero index. Everything lives in the rescaled picture of
// meancurv; r = 0 is always handled by closed-form limits, never by
// dividing by r.

#include "pmc/expr.hpp"
#include "pmc/geodesic.hpp"
#include "pmc/metric.hpp"
#include "pmc/sphere.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pmc {

struct ReduceOpts {
  double inner_tol = 1e-10;  // sup gate on the projected scaled residual
  int inner_maxit = 50;
  double outer_tol = 1e-10;  // gate on |G(r, tau)|
  int newton_maxit = 30;
  double leaf_tol = 1e-8;    // unscaled certificate |H - (n/fp) F|_inf
  double rho = 0.125;        // tau ball radius for degree work
};

// One prescription problem: a chart, a positive function f, a base point
// and the harmonic resolution. Owns its grid and the frame plus jet data
// at p; the chart and f must outlive it.
class Problem {
 public:
  Problem(const MetricChart& chart, const Expr& f, const double* p, int L,
          ReduceOpts opts = {});

  const MetricChart& chart() const { return *chart_; }
  const Expr& f() const { return *f_; }
  const SphereGrid& grid() const { return grid_; }
  int dim() const { return chart_->dim(); }  // ambient d = n + 1
  int n() const { return chart_->dim() - 1; }
  const double* p() const { return p_; }
  const Frame& frame() const { return frame_; }
  double fp() const { return fp_; }

  // e_i f(p) and the covariant Hessian (nabla^2 f)(e_i, e_j) at p.
  const double* grad_p() const { return grad_; }
  const double* hess_p() const { return hess_; }

  ReduceOpts opts;

 private:
  const MetricChart* chart_;
  const Expr* f_;
  SphereGrid grid_;
  double p_[3] = {};
  Frame frame_;
  double fp_ = 0.0;
  double grad_[3] = {};
  double hess_[9] = {};
};

// State of one inner solve. u is a coefficient vector with zero kernel
// part; H and F are node fields from the final iterate (empty at r = 0).
struct InnerResult {
  std::vector<double> u;
  double residual = 0.0;           // sup of the projected scaled residual
  double residual_unscaled = 0.0;  // sup of H - (n/fp) F over the nodes
  int iters = 0;
  std::vector<double> H;
  std::vector<double> F;
};

// Model solution at r = 0: (Delta + n) u0 = 1/3 (Ric_ij + 3n/(2 f(p))
// Hess_ij) x^i x^j, solved spectrally on the kernel complement. Throws
// when the source fails the Fredholm condition (it cannot, by parity,
// unless the curvature assembly is broken).
std::vector<double> solve_u0(const Problem& prob);

// Quasi-Newton solve of the kernel-orthogonal part at fixed (r, tau):
// u <- u - [(Delta + n)|_{K-perp}]^{-1} P_perp residual. The kernel part
// of the seed is discarded; r = 0 falls back to solve_u0. Throws on
// non-convergence (reporting the last residual) and lets the graph guard
// from meancurv propagate.
InnerResult inner_solve(const Problem& prob, double r, const double* tau,
                        const std::vector<double>* seed = nullptr);

struct OuterResult {
  double G[3] = {};
  InnerResult inner;  // inner state at (r, tau); empty fields at r = 0
};

// Kernel components G(r, tau) of the scaled defect. At r = 0 this is the
// continuous extension -(n/f(p)) sum_i (e_i^tau f)(c(tau)) e_i.
OuterResult outer_G(const Problem& prob, double r, const double* tau,
                    const std::vector<double>* seed = nullptr);

struct NewtonResult {
  double tau[3] = {};
  double Gnorm = 0.0;
  int iters = 0;
  InnerResult inner;  // inner state at the solved tau
};

// Newton in tau with the frozen Jacobian -(n/f(p)) Hess f(p); a rejected
// step triggers one finite-difference refresh of the Jacobian, then
// backtracking. Throws when the Jacobian is singular (suggesting the
// degree-based path) and on non-convergence.
NewtonResult newton_tau(const Problem& prob, double r,
                        const double* tau_seed = nullptr,
                        const std::vector<double>* u_seed = nullptr);

struct DegreeReport {
  double rho = 0.0;
  int boundary_samples = 0;
  int degree = 0;
  bool homotopy_ok = false;
  double residue = 0.0;            // |raw winding - degree| before rounding
  double min_boundary_norm = 0.0;  // of the field whose degree is reported
};

using VecField = std::function<void(const double* tau, double* out)>;

// Brouwer degree of a continuous field over the ball |tau - center| <= rho.
// Dimension 2 sums angle increments along 4096 boundary samples; dimension
// 3 sums signed solid angles of the image triangles of an icosahedral
// refinement with 20480 faces. Throws when the field comes within 1e-8 of
// zero on the boundary or the winding residue reaches 0.2. homotopy_ok is
// vacuously true here; index_gradient fills it meaningfully.
DegreeReport brouwer_degree(int dim, const VecField& field,
                            const double* center, double rho);

// Index of the gradient field at p: the degree of g^{-1} D_tau f over
// |tau| <= rho in normal coordinates, certified against the outer map by
// the homotopy [(1-s) B(tau) + s g(tau)^{-1}] D_tau f(tau) sampled at 17
// values of s per boundary point. Throws when p is not an isolated
// critical zero on this ball or when the homotopy vanishes somewhere
// (the witness (s, tau) is in the message).
DegreeReport index_gradient(const Problem& prob, double rho);

struct DegenResult {
  double tau[3] = {};
  double Gnorm = 0.0;
  int top_degree = 0;   // degree of G(r, .) over the initial cell
  int depth = 0;        // subdivision levels descended
  int field_evals = 0;  // outer-map evaluations spent
  InnerResult inner;
};

// Zero of G(r, .) by recursive dyadic subdivision of the square/cube
// inscribed in |tau| <= rho: keep the first child (fixed scan order)
// whose boundary degree is nonzero, shrinking a cell by 0.99 when the
// field vanishes on its boundary, until |G| <= leaf_tol at a cell center
// or the diameter falls below 1e-9. A zero lying exactly on a dyadic
// plane splits the winding between children; when every child reports
// degree zero the frame is offset by a third of a cell, which moves the
// planes off the zero for good. Requires a nonzero index and checks that
// G(s r, .) stays nonzero on the ball boundary for s in [0, 1].
DegenResult degenerate_solve(const Problem& prob, double r, double rho);

enum class SolveMode { nondegenerate, degenerate };

struct FamilyLeaf {
  double r = 0.0;
  double tau_bar[3] = {};
  std::vector<double> u;
  double residual_sup = 0.0;  // |H - (n/fp) F|_inf, unscaled
  int inner_iters = 0;
  int outer_iters = 0;
};

struct BuildResult {
  std::vector<FamilyLeaf> leaves;
  bool complete = false;
  int fail_index = -1;  // grid index of the first failing leaf
  std::string fail_message;
};

// Continuation over an ascending r grid: the smallest radius is seeded by
// (u0, tau = 0) and every leaf seeds the next. A leaf failure stops the
// build and the partial family is returned with the failure labeled.
BuildResult build_family(const Problem& prob, const std::vector<double>& r_grid,
                         SolveMode mode);

struct FoliationReport {
  bool enough_leaves = false;  // at least 4
  bool tau_slope_skipped = false;
  bool tau_slope_ok = false;
  double tau_slope = 0.0;
  bool disjoint_ok = false;
  double min_gap = 0.0;  // smallest adjacent-leaf node distance
  bool monotone_ok = false;
  int directions = 0;

  bool ok() const {
    return enough_leaves && (tau_slope_skipped || tau_slope_ok) &&
           disjoint_ok && monotone_ok;
  }
};

// Numerical foliation evidence for a built family: fitted |tau_bar(r)|
// slope >= 1.9 (skipped when tau_bar vanishes identically), pairwise
// disjointness of adjacent leaves' node samples in chart coordinates, and
// strict growth of the leaf support function along 64 fixed directions.
// Never throws; the report carries one flag per check.
FoliationReport foliation_check(const Problem& prob,
                                const std::vector<FamilyLeaf>& leaves);

struct UniquenessReport {
  int attempted = 0;
  int converged = 0;
  double tau_spread = 0.0;  // max pairwise |tau_a - tau_b|
  double u_spread = 0.0;    // max pairwise sup |u_a - u_b| at the nodes
  bool ok = false;          // both spreads <= 1e-8
  std::vector<std::string> failures;
};

// Re-solves the leaf at radius r from n_seeds randomized starts: u0 plus
// band-limited noise of sup norm 0.3 r^(3/2) |u0|_inf (overridden by a
// non-negative noise_sup) and tau within half the degree ball. Individual
// seeds may fail (recorded, not fatal); fewer than two convergences
// throws.
UniquenessReport uniqueness_probe(const Problem& prob, double r, int n_seeds,
                                  double noise_sup = -1.0);

} // namespace pmc
