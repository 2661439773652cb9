#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xalign/errors.hpp"

namespace xalign {

// Row-major dense matrix of 64-bit floats. data.size() == rows*cols always;
// finiteness is checked at IO and training boundaries, not per access.
struct DenseMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(size_t r, size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* row(size_t i) noexcept { return data.data() + i * cols; }
  const double* row(size_t i) const noexcept { return data.data() + i * cols; }

  std::span<double> row_span(size_t i) noexcept { return {row(i), cols}; }
  std::span<const double> row_span(size_t i) const noexcept { return {row(i), cols}; }

  double& at(size_t i, size_t j) noexcept { return data[i * cols + j]; }
  double at(size_t i, size_t j) const noexcept { return data[i * cols + j]; }

  bool empty() const noexcept { return rows == 0 || cols == 0; }
  size_t size() const noexcept { return data.size(); }
};

inline bool all_finite(std::span<const double> v) noexcept {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(std::span<const double> v, const std::string& what) {
  for (size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw numeric_error(what + ": non-finite value at index " + std::to_string(i));
}

inline DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols, m.rows);
  for (size_t i = 0; i < m.rows; ++i)
    for (size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

// [a | b] rowwise; row counts must agree.
inline DenseMatrix hconcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows)
    throw shape_error("hconcat: row mismatch " + std::to_string(a.rows) + " vs " +
                      std::to_string(b.rows));
  DenseMatrix out(a.rows, a.cols + b.cols);
  for (size_t i = 0; i < a.rows; ++i) {
    double* dst = out.row(i);
    const double* ra = a.row(i);
    const double* rb = b.row(i);
    for (size_t j = 0; j < a.cols; ++j) dst[j] = ra[j];
    for (size_t j = 0; j < b.cols; ++j) dst[a.cols + j] = rb[j];
  }
  return out;
}

}  // namespace xalign
