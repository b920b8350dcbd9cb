#pragma once

// Dense helpers for the tiny matrices this project deals in (d <= 3):
// metric components, frames, Hessians of the reduced functional. Matrices
// are row-major double[d*d]. Nothing here allocates.

namespace pmc::smallmat {

double det(int d, const double* A);

// Inverse via cofactors. Returns false when |det| is negligible relative
// to the matrix scale; Ainv is untouched in that case.
bool invert(int d, const double* A, double* Ainv);

// Solve A x = b through the explicit inverse (fine at these sizes).
bool solve(int d, const double* A, const double* b, double* x);

void matmul(int d, const double* A, const double* B, double* C);

// Eigenvalues of a symmetric matrix, ascending. Closed forms: trivial for
// d = 1, quadratic for d = 2, the trigonometric resolvent for d = 3.
void sym_eigvals(int d, const double* A, double* w);

// Spectral condition number |lambda|_max / |lambda|_min of a symmetric
// matrix; returns a huge value (1e300) when the smallest eigenvalue
// vanishes.
double cond_sym(int d, const double* A);

void cross3(const double* a, const double* b, double* out);

} // namespace pmc::smallmat
