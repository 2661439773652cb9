#pragma once

#include <cstddef>

namespace xalign::kernels {

// Dense double-precision kernels behind the numeric modules. Two backends:
// a scalar reference and an AVX2+FMA variant, selected once per process by
// CPUID (override with XALIGN_SIMD=scalar|avx2|auto).
//
// Equivalence contract, relied on by tests:
//   - elementwise kernels (axpy, scale, relu, relu_mask_backward,
//     adam_update, gemv_t, ger_acc) are bit-identical across backends —
//     the AVX2 versions use the same per-element operation order and no FMA
//     contraction;
//   - reduction kernels (dot, nrm2sq, sum, dist2, abs_diff_sum, gemv)
//     reassociate the sum and agree to relative tolerance only.
struct Backend {
  const char* name;

  double (*dot)(const double* a, const double* b, size_t n);
  double (*nrm2sq)(const double* a, size_t n);
  double (*sum)(const double* a, size_t n);
  double (*dist2)(const double* a, const double* b, size_t n);
  double (*abs_diff_sum)(const double* a, const double* b, size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, size_t n);
  void (*scale)(double alpha, double* x, size_t n);

  // y = max(x, 0); out = (pre > 0) ? g : 0
  void (*relu)(const double* x, double* y, size_t n);
  void (*relu_mask_backward)(const double* pre, const double* g, double* out, size_t n);

  // In-place Adam: m,v moments, g gradient; bc1 = 1-beta1^t, bc2 = 1-beta2^t.
  void (*adam_update)(double* p, double* m, double* v, const double* g, size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);

  // Row-major M (rows x cols): y = M x, y = M^T x, M += g x^T.
  void (*gemv)(const double* m, size_t rows, size_t cols, const double* x, double* y);
  void (*gemv_t)(const double* m, size_t rows, size_t cols, const double* x, double* y);
  void (*ger_acc)(double* m, size_t rows, size_t cols, const double* g, const double* x);
};

const Backend& scalar_backend();

// nullptr when the binary was built without the AVX2 TU or the CPU lacks
// AVX2/FMA.
const Backend* avx2_backend();

// The dispatched backend; resolved on first call and stable afterwards.
const Backend& active();

inline double dot(const double* a, const double* b, size_t n) { return active().dot(a, b, n); }
inline double nrm2sq(const double* a, size_t n) { return active().nrm2sq(a, n); }
inline double sum(const double* a, size_t n) { return active().sum(a, n); }
inline double dist2(const double* a, const double* b, size_t n) { return active().dist2(a, b, n); }
inline double abs_diff_sum(const double* a, const double* b, size_t n) {
  return active().abs_diff_sum(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void scale(double alpha, double* x, size_t n) { active().scale(alpha, x, n); }
inline void relu(const double* x, double* y, size_t n) { active().relu(x, y, n); }
inline void relu_mask_backward(const double* pre, const double* g, double* out, size_t n) {
  active().relu_mask_backward(pre, g, out, n);
}
inline void adam_update(double* p, double* m, double* v, const double* g, size_t n, double lr,
                        double beta1, double beta2, double eps, double bc1, double bc2) {
  active().adam_update(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}
inline void gemv(const double* m, size_t rows, size_t cols, const double* x, double* y) {
  active().gemv(m, rows, cols, x, y);
}
inline void gemv_t(const double* m, size_t rows, size_t cols, const double* x, double* y) {
  active().gemv_t(m, rows, cols, x, y);
}
inline void ger_acc(double* m, size_t rows, size_t cols, const double* g, const double* x) {
  active().ger_acc(m, rows, cols, g, x);
}

}  // namespace xalign::kernels
