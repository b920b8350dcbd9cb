#include "pmc/smallmat.hpp"

#include <algorithm>
#include <cmath>

namespace pmc::smallmat {

double det(int d, const double* A) {
  switch (d) {
    case 1:
      return A[0];
    case 2:
      return A[0] * A[3] - A[1] * A[2];
    default:
      return A[0] * (A[4] * A[8] - A[5] * A[7]) -
             A[1] * (A[3] * A[8] - A[5] * A[6]) +
             A[2] * (A[3] * A[7] - A[4] * A[6]);
  }
}

bool invert(int d, const double* A, double* Ainv) {
  double scale = 0.0;
  for (int i = 0; i < d * d; ++i) scale = std::max(scale, std::abs(A[i]));
  double dt = det(d, A);
  double floor = 1e-14;
  for (int k = 0; k < d; ++k) floor *= scale;
  if (dt == 0.0 || std::abs(dt) < floor) return false;
  double inv = 1.0 / dt;
  switch (d) {
    case 1:
      Ainv[0] = inv;
      break;
    case 2:
      Ainv[0] = A[3] * inv;
      Ainv[1] = -A[1] * inv;
      Ainv[2] = -A[2] * inv;
      Ainv[3] = A[0] * inv;
      break;
    default:
      Ainv[0] = (A[4] * A[8] - A[5] * A[7]) * inv;
      Ainv[1] = (A[2] * A[7] - A[1] * A[8]) * inv;
      Ainv[2] = (A[1] * A[5] - A[2] * A[4]) * inv;
      Ainv[3] = (A[5] * A[6] - A[3] * A[8]) * inv;
      Ainv[4] = (A[0] * A[8] - A[2] * A[6]) * inv;
      Ainv[5] = (A[2] * A[3] - A[0] * A[5]) * inv;
      Ainv[6] = (A[3] * A[7] - A[4] * A[6]) * inv;
      Ainv[7] = (A[1] * A[6] - A[0] * A[7]) * inv;
      Ainv[8] = (A[0] * A[4] - A[1] * A[3]) * inv;
      break;
  }
  return true;
}

bool solve(int d, const double* A, const double* b, double* x) {
  double Ainv[9];
  if (!invert(d, A, Ainv)) return false;
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += Ainv[i * d + j] * b[j];
    x[i] = s;
  }
  return true;
}

void matmul(int d, const double* A, const double* B, double* C) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += A[i * d + k] * B[k * d + j];
      C[i * d + j] = s;
    }
}

void sym_eigvals(int d, const double* A, double* w) {
  if (d == 1) {
    w[0] = A[0];
    return;
  }
  if (d == 2) {
    double tr = A[0] + A[3];
    double dt = A[0] * A[3] - A[1] * A[2];
    double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - dt));
    w[0] = tr / 2.0 - disc;
    w[1] = tr / 2.0 + disc;
    return;
  }
  // d = 3, trigonometric resolvent on the shifted matrix B = (A - q I)/p.
  double q = (A[0] + A[4] + A[8]) / 3.0;
  double p1 = A[1] * A[1] + A[2] * A[2] + A[5] * A[5];
  double p2 = (A[0] - q) * (A[0] - q) + (A[4] - q) * (A[4] - q) +
              (A[8] - q) * (A[8] - q) + 2.0 * p1;
  double p = std::sqrt(p2 / 6.0);
  if (p < 1e-300) {
    w[0] = w[1] = w[2] = q;
    return;
  }
  double B[9];
  for (int i = 0; i < 9; ++i) B[i] = A[i] / p;
  B[0] -= q / p;
  B[4] -= q / p;
  B[8] -= q / p;
  double r = det(3, B) / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  double phi = std::acos(r) / 3.0;
  double e1 = q + 2.0 * p * std::cos(phi);
  double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  double e2 = 3.0 * q - e1 - e3;
  w[0] = e3;
  w[1] = e2;
  w[2] = e1;
  if (w[0] > w[1]) std::swap(w[0], w[1]);
  if (w[1] > w[2]) std::swap(w[1], w[2]);
  if (w[0] > w[1]) std::swap(w[0], w[1]);
}

double cond_sym(int d, const double* A) {
  double w[3];
  sym_eigvals(d, A, w);
  double lo = 1e300, hi = 0.0;
  for (int i = 0; i < d; ++i) {
    lo = std::min(lo, std::abs(w[i]));
    hi = std::max(hi, std::abs(w[i]));
  }
  if (lo == 0.0) return 1e300;
  return hi / lo;
}

void cross3(const double* a, const double* b, double* out) {
  out[0] = a[1] * b[2] - a[2] * b[1];
  out[1] = a[2] * b[0] - a[0] * b[2];
  out[2] = a[0] * b[1] - a[1] * b[0];
}

} // namespace pmc::smallmat
