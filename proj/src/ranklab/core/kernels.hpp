#pragma once

#include <cstdint>

namespace ranklab {

// Dense kernels used by every model's forward and backward pass.  The
// summation order is fixed (four strided accumulators for dot products), so
// results are bit-reproducible run to run while still vectorizing without
// -ffast-math.  The `refk` namespace keeps textbook single-accumulator
// versions; tests pin the optimized kernels against them and the benchmark
// measures the gap.

inline double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y = W x + b, W row-major [rows x cols]; pass b = nullptr for no bias.
inline void matvec(const double* W, const double* x, const double* b,
                   double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    y[r] = dot(W + static_cast<int64_t>(r) * cols, x, cols) + (b ? b[r] : 0.0);
}

// y += a * x
inline void axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// dx += W^T dy  (row-major W keeps the inner loop unit-stride)
inline void matvec_t_acc(const double* W, const double* dy, double* dx,
                         int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    axpy(dy[r], W + static_cast<int64_t>(r) * cols, dx, cols);
}

// dW += dy x^T ; db += dy   (pass db = nullptr to skip)
inline void ger_acc(double* dW, double* db, const double* dy, const double* x,
                    int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    axpy(dy[r], x, dW + static_cast<int64_t>(r) * cols, cols);
    if (db) db[r] += dy[r];
  }
}

namespace refk {

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void matvec(const double* W, const double* x, const double* b,
                   double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double s = b ? b[r] : 0.0;
    for (int c = 0; c < cols; ++c) s += W[static_cast<int64_t>(r) * cols + c] * x[c];
    y[r] = s;
  }
}

}  // namespace refk

}  // namespace ranklab
