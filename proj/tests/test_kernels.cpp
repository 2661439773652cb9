#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "xalign/kernels.hpp"
#include "xalign/rng.hpp"

using namespace xalign;
namespace k = xalign::kernels;

namespace {

const std::vector<size_t> kSizes = {0, 1, 2, 3, 4, 7, 8, 15, 16, 17, 63, 64, 257, 1000, 4608};

std::vector<double> random_vec(SeededRng& rng, size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Relative tolerance for reassociated reductions; scaled softly with n.
bool close_reduction(double a, double b, size_t n) {
  const double tol = 1e-12 * (1.0 + std::log2(2.0 + static_cast<double>(n)));
  return std::fabs(a - b) <= tol * (1.0 + std::fabs(a) + std::fabs(b));
}

}  // namespace

TEST_CASE("active backend resolves") {
  CHECK(k::active().name != nullptr);
  INFO("active backend: ", k::active().name);
  CHECK(k::scalar_backend().dot != nullptr);
}

TEST_CASE("reduction kernels agree across backends within tolerance") {
  const k::Backend* simd = k::avx2_backend();
  if (!simd) return;  // nothing to compare on this host
  const k::Backend& ref = k::scalar_backend();
  SeededRng rng(42);
  for (size_t n : kSizes) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    CAPTURE(n);
    CHECK(close_reduction(ref.dot(a.data(), b.data(), n), simd->dot(a.data(), b.data(), n), n));
    CHECK(close_reduction(ref.nrm2sq(a.data(), n), simd->nrm2sq(a.data(), n), n));
    CHECK(close_reduction(ref.sum(a.data(), n), simd->sum(a.data(), n), n));
    CHECK(close_reduction(ref.dist2(a.data(), b.data(), n), simd->dist2(a.data(), b.data(), n), n));
    CHECK(close_reduction(ref.abs_diff_sum(a.data(), b.data(), n),
                          simd->abs_diff_sum(a.data(), b.data(), n), n));
  }
}

TEST_CASE("elementwise kernels are bit-identical across backends") {
  const k::Backend* simd = k::avx2_backend();
  if (!simd) return;
  const k::Backend& ref = k::scalar_backend();
  SeededRng rng(7);
  for (size_t n : kSizes) {
    CAPTURE(n);
    auto x = random_vec(rng, n);
    auto y0 = random_vec(rng, n);
    auto y1 = y0;
    const double alpha = rng.normal();

    ref.axpy(alpha, x.data(), y0.data(), n);
    simd->axpy(alpha, x.data(), y1.data(), n);
    CHECK(y0 == y1);

    auto s0 = x, s1 = x;
    ref.scale(alpha, s0.data(), n);
    simd->scale(alpha, s1.data(), n);
    CHECK(s0 == s1);

    std::vector<double> r0(n), r1(n);
    ref.relu(x.data(), r0.data(), n);
    simd->relu(x.data(), r1.data(), n);
    CHECK(r0 == r1);

    auto g = random_vec(rng, n);
    std::vector<double> m0(n), m1(n);
    ref.relu_mask_backward(x.data(), g.data(), m0.data(), n);
    simd->relu_mask_backward(x.data(), g.data(), m1.data(), n);
    CHECK(m0 == m1);
  }
}

TEST_CASE("adam_update is bit-identical across backends") {
  const k::Backend* simd = k::avx2_backend();
  if (!simd) return;
  const k::Backend& ref = k::scalar_backend();
  SeededRng rng(11);
  for (size_t n : kSizes) {
    CAPTURE(n);
    auto p0 = random_vec(rng, n);
    auto m0 = random_vec(rng, n, 0.1);
    auto v0 = random_vec(rng, n, 0.01);
    for (auto& x : v0) x = std::fabs(x);
    auto g = random_vec(rng, n);
    auto p1 = p0, m1 = m0, v1 = v0;
    ref.adam_update(p0.data(), m0.data(), v0.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                    0.1, 0.001999);
    simd->adam_update(p1.data(), m1.data(), v1.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                      0.1, 0.001999);
    CHECK(p0 == p1);
    CHECK(m0 == m1);
    CHECK(v0 == v1);
  }
}

TEST_CASE("gemv family matches a naive triple loop") {
  SeededRng rng(3);
  for (auto [rows, cols] : std::vector<std::pair<size_t, size_t>>{
           {1, 1}, {3, 5}, {8, 8}, {17, 33}, {64, 128}, {5, 4608}}) {
    CAPTURE(rows);
    CAPTURE(cols);
    auto m = random_vec(rng, rows * cols);
    auto x = random_vec(rng, cols);
    auto xr = random_vec(rng, rows);

    std::vector<double> want(rows, 0.0);
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) want[r] += m[r * cols + c] * x[c];
    std::vector<double> got(rows, 0.0);
    k::gemv(m.data(), rows, cols, x.data(), got.data());
    for (size_t r = 0; r < rows; ++r) CHECK(close_reduction(want[r], got[r], cols));

    std::vector<double> want_t(cols, 0.0);
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) want_t[c] += m[r * cols + c] * xr[r];
    std::vector<double> got_t(cols, 0.0);
    k::gemv_t(m.data(), rows, cols, xr.data(), got_t.data());
    for (size_t c = 0; c < cols; ++c) CHECK(close_reduction(want_t[c], got_t[c], rows));

    auto acc = m;
    k::ger_acc(acc.data(), rows, cols, xr.data(), x.data());
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) {
        const double want_rc = m[r * cols + c] + xr[r] * x[c];
        CHECK(acc[r * cols + c] == doctest::Approx(want_rc).epsilon(1e-12));
      }
  }
}

TEST_CASE("gemv_t across backends is bit-identical") {
  const k::Backend* simd = k::avx2_backend();
  if (!simd) return;
  const k::Backend& ref = k::scalar_backend();
  SeededRng rng(9);
  const size_t rows = 13, cols = 37;
  auto m = random_vec(rng, rows * cols);
  auto x = random_vec(rng, rows);
  std::vector<double> y0(cols), y1(cols);
  ref.gemv_t(m.data(), rows, cols, x.data(), y0.data());
  simd->gemv_t(m.data(), rows, cols, x.data(), y1.data());
  CHECK(y0 == y1);

  auto a0 = m, a1 = m;
  auto g = random_vec(rng, rows);
  auto v = random_vec(rng, cols);
  ref.ger_acc(a0.data(), rows, cols, g.data(), v.data());
  simd->ger_acc(a1.data(), rows, cols, g.data(), v.data());
  CHECK(a0 == a1);
}

TEST_CASE("rng determinism and basic distribution sanity") {
  SeededRng a(123), b(123), c(124);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  CHECK(a.next_u64() != c.next_u64());

  SeededRng r(5);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = r.normal();
  for (double x : xs) mean += x;
  mean /= n;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(std::fabs(mean) < 0.05);
  CHECK(std::fabs(var - 1.0) < 0.05);

  // derived streams differ from the parent and from each other
  SeededRng base(99);
  auto d1 = base.derive(1);
  auto d2 = base.derive(2);
  CHECK(d1.next_u64() != d2.next_u64());
}
