#include <cmath>
#include <cstddef>

#include "xalign/kernels.hpp"

// Reference backend. Every other backend is tested against these loops, so
// keep them as plain as possible: one loop, one accumulator, no reordering.

namespace xalign::kernels {
namespace scalar_impl {

double dot(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double nrm2sq(const double* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

double sum(const double* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double dist2(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double abs_diff_sum(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void relu(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_backward(const double* pre, const double* g, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? g[i] : 0.0;
}

void adam_update(double* p, double* m, double* v, const double* g, size_t n, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2) {
  const double one_b1 = 1.0 - beta1;
  const double one_b2 = 1.0 - beta2;
  for (size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + one_b1 * gi;
    v[i] = beta2 * v[i] + one_b2 * (gi * gi);
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
  }
}

void gemv(const double* m, size_t rows, size_t cols, const double* x, double* y) {
  for (size_t r = 0; r < rows; ++r) y[r] = dot(m + r * cols, x, cols);
}

void gemv_t(const double* m, size_t rows, size_t cols, const double* x, double* y) {
  for (size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (size_t r = 0; r < rows; ++r) axpy(x[r], m + r * cols, y, cols);
}

void ger_acc(double* m, size_t rows, size_t cols, const double* g, const double* x) {
  for (size_t r = 0; r < rows; ++r) axpy(g[r], x, m + r * cols, cols);
}

}  // namespace scalar_impl

const Backend& scalar_backend() {
  static const Backend b{
      "scalar",
      scalar_impl::dot,
      scalar_impl::nrm2sq,
      scalar_impl::sum,
      scalar_impl::dist2,
      scalar_impl::abs_diff_sum,
      scalar_impl::axpy,
      scalar_impl::scale,
      scalar_impl::relu,
      scalar_impl::relu_mask_backward,
      scalar_impl::adam_update,
      scalar_impl::gemv,
      scalar_impl::gemv_t,
      scalar_impl::ger_acc,
  };
  return b;
}

}  // namespace xalign::kernels
