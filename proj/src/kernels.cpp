#include "pmc/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace pmc::kernels {

namespace detail {

double dot_scalar(std::size_t n, const double* a, const double* b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s2) + (s1 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_scalar(std::size_t n, const double* w, const double* a,
                   const double* b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += w[i] * a[i] * b[i];
    s1 += w[i + 1] * a[i + 1] * b[i + 1];
    s2 += w[i + 2] * a[i + 2] * b[i + 2];
    s3 += w[i + 3] * a[i + 3] * b[i + 3];
  }
  double s = (s0 + s2) + (s1 + s3);
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

void matvec_scalar(std::size_t m, std::size_t n, const double* a,
                   const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) y[r] = dot_scalar(n, a + r * n, x);
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(std::size_t n, double alpha, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sup_abs_scalar(std::size_t n, const double* x) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

// AVX2 variants live in kernels_avx2.cpp (compiled with -mavx2).
double dot_avx2(std::size_t n, const double* a, const double* b);
double dot3_avx2(std::size_t n, const double* w, const double* a,
                 const double* b);
void matvec_avx2(std::size_t m, std::size_t n, const double* a,
                 const double* x, double* y);
void axpy_avx2(std::size_t n, double alpha, const double* x, double* y);
void scale_avx2(std::size_t n, double alpha, double* x);
double sup_abs_avx2(std::size_t n, const double* x);

} // namespace detail

namespace {

struct Dispatch {
  Backend backend;
  double (*dot)(std::size_t, const double*, const double*);
  double (*dot3)(std::size_t, const double*, const double*, const double*);
  void (*matvec)(std::size_t, std::size_t, const double*, const double*,
                 double*);
  void (*axpy)(std::size_t, double, const double*, double*);
  void (*scale)(std::size_t, double, double*);
  double (*sup_abs)(std::size_t, const double*);
};

constexpr Dispatch kScalar = {Backend::scalar,
                              detail::dot_scalar,
                              detail::dot3_scalar,
                              detail::matvec_scalar,
                              detail::axpy_scalar,
                              detail::scale_scalar,
                              detail::sup_abs_scalar};

constexpr Dispatch kAvx2 = {Backend::avx2,
                            detail::dot_avx2,
                            detail::dot3_avx2,
                            detail::matvec_avx2,
                            detail::axpy_avx2,
                            detail::scale_avx2,
                            detail::sup_abs_avx2};

bool cpu_has_avx2() { return __builtin_cpu_supports("avx2"); }

const Dispatch* g_active = nullptr;

const Dispatch* active() {
  if (!g_active) g_active = cpu_has_avx2() ? &kAvx2 : &kScalar;
  return g_active;
}

} // namespace

Backend active_backend() { return active()->backend; }

void force_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw std::runtime_error("kernels: avx2 backend requested but the CPU does not support it");
  g_active = (b == Backend::avx2) ? &kAvx2 : &kScalar;
}

double dot(std::size_t n, const double* a, const double* b) {
  return active()->dot(n, a, b);
}

double dot3(std::size_t n, const double* w, const double* a, const double* b) {
  return active()->dot3(n, w, a, b);
}

void matvec(std::size_t m, std::size_t n, const double* a, const double* x,
            double* y) {
  active()->matvec(m, n, a, x, y);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  active()->axpy(n, alpha, x, y);
}

void scale(std::size_t n, double alpha, double* x) {
  active()->scale(n, alpha, x);
}

double sup_abs(std::size_t n, const double* x) {
  return active()->sup_abs(n, x);
}

} // namespace pmc::kernels
