// AVX2 backend. Mirrors the scalar reference exactly: four partial sums in
// the vector lanes (lane j sees indices i == j mod 4), combined on exit as
// (s0 + s2) + (s1 + s3), ragged tail added sequentially, multiplies and adds
// kept separate (this unit is built with -ffp-contract=off, and no fmadd
// intrinsics are used).

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace pmc::kernels::detail {

namespace {

inline double reduce_lanes(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[2]) + (lane[1] + lane[3]);
}

} // namespace

double dot_avx2(std::size_t n, const double* a, const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
  }
  double s = reduce_lanes(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_avx2(std::size_t n, const double* w, const double* a,
                 const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vw = _mm256_loadu_pd(w + i);
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(vw, va), vb));
  }
  double s = reduce_lanes(acc);
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

void matvec_avx2(std::size_t m, std::size_t n, const double* a,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) y[r] = dot_avx2(n, a + r * n, x);
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(std::size_t n, double alpha, double* x) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

double sup_abs_avx2(std::size_t n, const double* x) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d vm = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    vm = _mm256_max_pd(vm, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, vm);
  double m = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
  for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

} // namespace pmc::kernels::detail
