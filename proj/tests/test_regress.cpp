#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "xalign/errors.hpp"
#include "xalign/regress.hpp"
#include "xalign/rng.hpp"

using namespace xalign;

namespace {

DenseMatrix column_matrix(const std::vector<double>& values) {
  DenseMatrix m(values.size(), 1);
  m.data = values;
  return m;
}

// Exhaustive oracle with an independent code path: full stable sort.
std::vector<double> knn_oracle(const DenseMatrix& train, const std::vector<double>& targets,
                               const DenseMatrix& queries, size_t k) {
  std::vector<double> out(queries.rows);
  for (size_t q = 0; q < queries.rows; ++q) {
    std::vector<std::pair<double, size_t>> d;
    for (size_t t = 0; t < train.rows; ++t) {
      double acc = 0;
      for (size_t c = 0; c < train.cols; ++c) {
        const double diff = queries.at(q, c) - train.at(t, c);
        acc += diff * diff;
      }
      d.push_back({acc, t});
    }
    std::stable_sort(d.begin(), d.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double acc = 0;
    for (size_t i = 0; i < k; ++i) acc += targets[d[i].second];
    out[q] = acc / static_cast<double>(k);
  }
  return out;
}

// A store whose five representations are hand-built; embeddings themselves
// are unused by the regression paths.
DatasetStore skeleton_store(size_t n, SeededRng& rng) {
  std::vector<EmbeddingPair> pairs(n);
  for (size_t i = 0; i < n; ++i) {
    pairs[i].source_id = "r" + std::to_string(i);
    pairs[i].spectral = {rng.normal(), rng.normal()};
    pairs[i].text = {rng.normal(), rng.normal(), rng.normal()};
  }
  std::vector<std::string> ids;
  for (const auto& p : pairs) ids.push_back(p.source_id);
  // deterministic striped split keeps every split populated at small n
  SplitAssignment splits;
  for (size_t i = 0; i < n; ++i) {
    Split s = i % 4 == 0   ? Split::Validation
              : i % 4 == 1 ? Split::Test
                           : Split::Train;
    if (i == 2) s = Split::Calibration;
    splits.label[ids[i]] = s;
  }
  return join_dataset(pairs, {}, splits);
}

}  // namespace

TEST_CASE("knn: query equal to a training point with k=1") {
  const auto train = column_matrix({0, 1, 2, 10});
  const std::vector<double> targets{5, 6, 7, 8};
  const auto pred = knn_regress(train, targets, column_matrix({2.0}), 1);
  CHECK(pred[0] == 7.0);
}

TEST_CASE("knn: spec example k=3 over {0,1,2,10}") {
  const auto train = column_matrix({0, 1, 2, 10});
  const std::vector<double> targets{0, 1, 2, 10};
  const auto pred = knn_regress(train, targets, column_matrix({0.4}), 3);
  CHECK(pred[0] == doctest::Approx(1.0));
}

TEST_CASE("knn: constant targets give constant predictions") {
  SeededRng rng(4);
  DenseMatrix train(20, 3);
  for (auto& v : train.data) v = rng.normal();
  const std::vector<double> targets(20, 3.25);
  DenseMatrix queries(7, 3);
  for (auto& v : queries.data) v = rng.normal();
  for (double p : knn_regress(train, targets, queries, 3))
    CHECK(p == doctest::Approx(3.25).epsilon(1e-15));
}

TEST_CASE("knn: fewer than k points raises") {
  const auto train = column_matrix({0, 1});
  CHECK_THROWS_AS(knn_regress(train, std::vector<double>{1, 2}, column_matrix({0.5}), 3),
                  Error);
}

TEST_CASE("knn oracle equivalence on random data, including k = N") {
  SeededRng rng(2024);
  for (int trial = 0; trial < 8; ++trial) {
    const size_t n = 10 + rng.below(91);  // up to 100
    const size_t dim = 1 + rng.below(6);
    DenseMatrix train(n, dim);
    for (auto& v : train.data) v = rng.uniform(-3, 3);
    std::vector<double> targets(n);
    for (auto& t : targets) t = rng.uniform(-10, 10);
    DenseMatrix queries(12, dim);
    for (auto& v : queries.data) v = rng.uniform(-3, 3);

    for (size_t k : {size_t{1}, size_t{3}, n}) {
      const auto got = knn_regress(train, targets, queries, k);
      const auto want = knn_oracle(train, targets, queries, k);
      for (size_t q = 0; q < queries.rows; ++q)
        CHECK(got[q] == doctest::Approx(want[q]).epsilon(1e-12));
    }

    // k = N reduces to the global mean
    double mean = 0;
    for (double t : targets) mean += t;
    mean /= static_cast<double>(n);
    for (double p : knn_regress(train, targets, queries, n))
      CHECK(p == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("knn: distance ties resolve by training order") {
  // two training points equidistant from the query
  const auto train = column_matrix({-1, 1, 5});
  const std::vector<double> targets{10, 20, 30};
  const auto pred = knn_regress(train, targets, column_matrix({0.0}), 1);
  CHECK(pred[0] == 10.0);  // index 0 wins the tie
}

TEST_CASE("knn: invariant under a rigid rotation") {
  SeededRng rng(8);
  const size_t dim = 2;
  DenseMatrix train(30, dim);
  for (auto& v : train.data) v = rng.normal();
  std::vector<double> targets(30);
  for (auto& t : targets) t = rng.normal();
  DenseMatrix queries(9, dim);
  for (auto& v : queries.data) v = rng.normal();
  const auto base = knn_regress(train, targets, queries, 3);

  const double theta = 0.83;
  auto rotate = [&](const DenseMatrix& m) {
    DenseMatrix out(m.rows, 2);
    for (size_t r = 0; r < m.rows; ++r) {
      out.at(r, 0) = std::cos(theta) * m.at(r, 0) - std::sin(theta) * m.at(r, 1);
      out.at(r, 1) = std::sin(theta) * m.at(r, 0) + std::cos(theta) * m.at(r, 1);
    }
    return out;
  };
  const auto rotated = knn_regress(rotate(train), targets, rotate(queries), 3);
  for (size_t q = 0; q < queries.rows; ++q)
    CHECK(std::fabs(base[q] - rotated[q]) < 1e-9);
}

TEST_CASE("mae basics and oracle") {
  CHECK(mae(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(mae(std::vector<double>{0, 0}, std::vector<double>{1, -1}) == 1.0);
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), Error);

  SeededRng rng(3);
  std::vector<double> p(100), t(100);
  for (size_t i = 0; i < 100; ++i) {
    p[i] = rng.normal();
    t[i] = rng.normal();
  }
  double want = 0;
  for (size_t i = 0; i < 100; ++i) want += std::fabs(p[i] - t[i]);
  want /= 100;
  CHECK(mae(p, t) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("pearson: exact values and degenerate flag") {
  std::vector<double> x{1, 2, 3, 4};
  std::vector<double> lin, neg;
  for (double v : x) {
    lin.push_back(2 * v + 3);
    neg.push_back(-v);
  }
  CHECK(pearson(x, lin).rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, neg).rho == doctest::Approx(-1.0).epsilon(1e-12));

  // hand case: x=[1,2,3], y=[1,3,2] -> 0.5
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}).rho ==
        doctest::Approx(0.5).epsilon(1e-12));

  const auto flat = pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3});
  CHECK(flat.rho == 0.0);
  CHECK(flat.degenerate);

  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{2}), Error);
}

TEST_CASE("pearson: invariant under positive affine maps, sign flips under negative") {
  SeededRng rng(12);
  std::vector<double> x(50), y(50);
  for (size_t i = 0; i < 50; ++i) {
    x[i] = rng.normal();
    y[i] = 0.6 * x[i] + rng.normal();
  }
  const double base = pearson(x, y).rho;
  std::vector<double> xs;
  for (double v : x) xs.push_back(4.2 * v - 17);
  CHECK(std::fabs(pearson(xs, y).rho - base) < 1e-12);
  std::vector<double> xn;
  for (double v : x) xn.push_back(-2.0 * v + 5);
  CHECK(std::fabs(pearson(xn, y).rho + base) < 1e-12);
}

TEST_CASE("correlation_table: self-correlated dimension ranks first") {
  SeededRng rng(9);
  const size_t n = 40;
  DatasetStore store = skeleton_store(n, rng);
  DenseMatrix latents(n, 3);
  for (size_t r = 0; r < n; ++r) {
    latents.at(r, 0) = rng.normal();
    latents.at(r, 1) = rng.normal();
    latents.at(r, 2) = 0.0;  // constant -> degenerate
    store.physical.at(r, 0) = latents.at(r, 1);  // hard_hs == dim 1 exactly
    store.physical.at(r, 4) = rng.normal();
  }
  const auto table = correlation_table(latents, store, 10);
  REQUIRE(!table.empty());
  CHECK(table[0].dim == 1);
  CHECK(table[0].variable == "hard_hs");
  CHECK(table[0].abs_rho == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& e : table) {
    if (e.dim == 2) {
      CHECK(e.degenerate);
      CHECK(e.abs_rho == 0.0);
    }
  }
  // reproducibility, bit for bit
  const auto again = correlation_table(latents, store, 10);
  REQUIRE(again.size() == table.size());
  for (size_t i = 0; i < table.size(); ++i) {
    CHECK(again[i].dim == table[i].dim);
    CHECK(again[i].variable == table[i].variable);
    CHECK(again[i].abs_rho == table[i].abs_rho);
  }
}

TEST_CASE("correlation_table: unjoinable latents raise") {
  SeededRng rng(2);
  DatasetStore store = skeleton_store(8, rng);
  DenseMatrix latents(4, 2);
  CHECK_THROWS_AS(correlation_table(latents, store, 5), Error);
}

namespace {

// Five-way synthetic selection problem: each variable is readable from
// exactly one representation (plus the fused one when built from post parts).
struct MoeFixture {
  DatasetStore store;
  RepresentationSet reps;
  // factors behind each representation
  std::vector<double> f_pre_s, f_pre_t, f_post_s, f_post_t;
};

MoeFixture build_moe_fixture(size_t n, uint64_t seed) {
  SeededRng rng(seed);
  MoeFixture fx;
  fx.store = skeleton_store(n, rng);
  auto fill = [&](std::vector<double>& f) {
    f.resize(n);
    for (auto& v : f) v = rng.normal();
  };
  fill(fx.f_pre_s);
  fill(fx.f_pre_t);
  fill(fx.f_post_s);
  fill(fx.f_post_t);

  auto factor_matrix = [&](const std::vector<double>& f) {
    DenseMatrix m(n, 2);
    for (size_t r = 0; r < n; ++r) {
      m.at(r, 0) = f[r];
      m.at(r, 1) = 0.05 * rng.normal();
    }
    return m;
  };
  fx.reps.pre_spectra = factor_matrix(fx.f_pre_s);
  fx.reps.pre_text = factor_matrix(fx.f_pre_t);
  fx.reps.post_spectra = factor_matrix(fx.f_post_s);
  fx.reps.post_text = factor_matrix(fx.f_post_t);
  fx.reps.post_both = hconcat(fx.reps.post_spectra, fx.reps.post_text);

  // variable 0 <- pre_spectra factor; 1 <- pre_text; 2 <- post_spectra;
  // 3 <- post_text; 4 <- post_spectra + post_text (fused wins)
  for (size_t r = 0; r < n; ++r) {
    fx.store.physical.at(r, 0) = fx.f_pre_s[r];
    fx.store.physical.at(r, 1) = fx.f_pre_t[r];
    fx.store.physical.at(r, 2) = fx.f_post_s[r];
    fx.store.physical.at(r, 3) = fx.f_post_t[r];
    fx.store.physical.at(r, 4) = fx.f_post_s[r] + fx.f_post_t[r];
  }
  return fx;
}

}  // namespace

TEST_CASE("moe_select: picks the representation that explains each variable") {
  const auto fx = build_moe_fixture(160, 31);
  CHECK(moe_select(fx.reps, fx.store, 0).kind == ReprKind::PreSpectra);
  CHECK(moe_select(fx.reps, fx.store, 1).kind == ReprKind::PreText);
  CHECK(moe_select(fx.reps, fx.store, 2).kind == ReprKind::PostSpectra);
  CHECK(moe_select(fx.reps, fx.store, 3).kind == ReprKind::PostText);
  CHECK(moe_select(fx.reps, fx.store, 4).kind == ReprKind::PostBoth);
}

TEST_CASE("moe_select: matches a brute-force argmax of validation Pearson") {
  const auto fx = build_moe_fixture(120, 77);
  // independent oracle: recompute all five validation scores by hand
  for (size_t variable = 0; variable < 6; ++variable) {
    std::vector<size_t> train_rows, val_rows;
    std::vector<double> train_y, val_y;
    for (size_t r = 0; r < fx.store.size(); ++r) {
      const auto v = fx.store.physical_value(r, variable);
      if (!v) continue;
      if (fx.store.split[r] == Split::Train) {
        train_rows.push_back(r);
        train_y.push_back(*v);
      } else if (fx.store.split[r] == Split::Validation) {
        val_rows.push_back(r);
        val_y.push_back(*v);
      }
    }
    if (train_rows.size() < 3 || val_y.size() < 2) continue;

    double best = -1e300;
    ReprKind best_kind = ReprKind::PostBoth;
    for (ReprKind kind : kMoePrecedence) {
      const auto& rep = fx.reps.get(kind);
      DenseMatrix train(train_rows.size(), rep.cols), queries(val_rows.size(), rep.cols);
      for (size_t i = 0; i < train_rows.size(); ++i)
        std::copy(rep.row(train_rows[i]), rep.row(train_rows[i]) + rep.cols, train.row(i));
      for (size_t i = 0; i < val_rows.size(); ++i)
        std::copy(rep.row(val_rows[i]), rep.row(val_rows[i]) + rep.cols, queries.row(i));
      const auto pred = knn_oracle(train, train_y, queries, 3);
      const double rho = pearson(pred, val_y).rho;
      if (rho > best) {
        best = rho;
        best_kind = kind;
      }
    }
    CHECK(moe_select(fx.reps, fx.store, variable).kind == best_kind);
  }
}

TEST_CASE("moe_select: chosen representation never underperforms on validation") {
  const auto fx = build_moe_fixture(140, 9);
  for (size_t variable = 0; variable < 5; ++variable) {
    const auto choice = moe_select(fx.reps, fx.store, variable);
    REQUIRE_FALSE(choice.skipped);
    const double chosen = choice.validation_scores[static_cast<size_t>(choice.kind)];
    for (double score : choice.validation_scores) CHECK(chosen >= score);
  }
}

TEST_CASE("moe_select: skips variables unusable on validation") {
  SeededRng rng(5);
  auto fx = build_moe_fixture(40, 3);
  // wipe variable 0 everywhere
  for (size_t r = 0; r < fx.store.size(); ++r)
    fx.store.physical.at(r, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(moe_select(fx.reps, fx.store, 0).skipped);
}

TEST_CASE("regression_report: perfect feature, baseline arithmetic, determinism") {
  const auto fx = build_moe_fixture(160, 13);
  RegressionOptions opt;
  opt.bootstrap_n = 200;
  opt.seed = 55;
  const auto report = regression_report(fx.reps, fx.store, opt);
  REQUIRE(report.variables.size() == kPhysicalVariableCount);

  const auto& v2 = report.variables[2];  // post_spectra variable
  CHECK_FALSE(v2.skipped);
  CHECK(v2.moe_choice == ReprKind::PostSpectra);
  CHECK(v2.moe_mae < 0.2);
  CHECK(v2.mean_baseline > v2.moe_mae);
  REQUIRE(v2.improvement_pct.has_value());
  CHECK(*v2.improvement_pct > 0.0);
  CHECK(v2.uncertainty > 0.0);

  // unpopulated variables skip with a report entry
  const auto& v9 = report.variables[9];
  CHECK(v9.skipped);
  CHECK_FALSE(v9.skip_reason.empty());

  const auto again = regression_report(fx.reps, fx.store, opt);
  for (size_t i = 0; i < report.variables.size(); ++i) {
    CHECK(report.variables[i].moe_mae == again.variables[i].moe_mae);
    CHECK(report.variables[i].uncertainty == again.variables[i].uncertainty);
  }
}

TEST_CASE("regression_report: mean baseline spec example") {
  // validation mean 1 predicted for test targets {0,2} -> MAE 1
  SeededRng rng(21);
  DatasetStore store = skeleton_store(12, rng);
  RepresentationSet reps;
  auto fill = [&](DenseMatrix& m) {
    m = DenseMatrix(12, 2);
    for (auto& v : m.data) v = rng.normal();
  };
  fill(reps.pre_spectra);
  fill(reps.pre_text);
  fill(reps.post_spectra);
  fill(reps.post_text);
  reps.post_both = hconcat(reps.post_spectra, reps.post_text);

  for (size_t r = 0; r < store.size(); ++r) {
    double v = 1.0;
    if (store.split[r] == Split::Validation) v = (r % 8 == 0) ? 0.0 : 2.0;
    if (store.split[r] == Split::Test) v = (r % 8 == 1) ? 0.0 : 2.0;
    store.physical.at(r, 7) = v;
  }
  // validation rows are 0,4,8 -> values 0,2,2; force mean exactly 1
  store.physical.at(8, 7) = 1.0;
  std::vector<double> val_vals;
  for (size_t r = 0; r < store.size(); ++r)
    if (store.split[r] == Split::Validation) val_vals.push_back(store.physical.at(r, 7));
  double mean = 0;
  for (double v : val_vals) mean += v;
  mean /= val_vals.size();
  REQUIRE(mean == 1.0);

  RegressionOptions opt;
  opt.bootstrap_n = 10;
  const auto report = regression_report(reps, store, opt);
  const auto& row = report.variables[7];
  REQUIRE_FALSE(row.skipped);
  // test rows carry {0,2,...}: |1-0| = |1-2| = 1
  CHECK(row.mean_baseline == doctest::Approx(1.0).epsilon(1e-12));
}
