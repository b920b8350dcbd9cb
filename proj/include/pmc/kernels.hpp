#pragma once

// Dense array primitives used by the spectral transforms, quadrature sums and
// field arithmetic. Two backends: a scalar reference and an AVX2 variant,
// selected once at runtime. Both follow the same summation contract so their
// results are bit-identical, which keeps outputs reproducible no matter which
// backend the host selects:
//
//   * reductions run four partial sums, partial j accumulating indices
//     i == j (mod 4), combined as (s0 + s2) + (s1 + s3), then the ragged
//     tail (n % 4 trailing elements) is added one by one in index order;
//   * every product feeds a separate add (no fused multiply-add); the
//     kernel translation units are compiled with -ffp-contract=off.

#include <cstddef>

namespace pmc::kernels {

enum class Backend { scalar, avx2 };

// Backend chosen at startup (avx2 when the CPU supports it).
Backend active_backend();

// Test hook. Requesting avx2 on a CPU without it is an error.
void force_backend(Backend b);

// sum_i a[i] * b[i]
double dot(std::size_t n, const double* a, const double* b);

// sum_i w[i] * a[i] * b[i]  (quadrature form)
double dot3(std::size_t n, const double* w, const double* a, const double* b);

// y[r] = dot(A row r, x); A is row-major m x n.
void matvec(std::size_t m, std::size_t n, const double* a, const double* x,
            double* y);

// y[i] += alpha * x[i]
void axpy(std::size_t n, double alpha, const double* x, double* y);

// x[i] *= alpha
void scale(std::size_t n, double alpha, double* x);

// max_i |x[i]|; 0 for empty input.
double sup_abs(std::size_t n, const double* x);

} // namespace pmc::kernels
