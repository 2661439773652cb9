#include "xalign/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "xalign/errors.hpp"
#include "xalign/parallel.hpp"
#include "xalign/retrieval.hpp"
#include "xalign/rng.hpp"

namespace xalign {

double average_path_length(size_t n) {
  if (n <= 1) return 0.0;
  // exact harmonic sums, cached once for the sizes scoring actually hits
  constexpr size_t kCached = 65536;
  static const std::vector<double> table = [] {
    std::vector<double> t(kCached + 1, 0.0);
    double h = 0.0;
    for (size_t m = 2; m <= kCached; ++m) {
      h += 1.0 / static_cast<double>(m - 1);  // H(m-1)
      t[m] = 2.0 * h - 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
    }
    return t;
  }();
  if (n <= kCached) return table[n];
  double h = 0.0;
  for (size_t i = 1; i <= n - 1; ++i) h += 1.0 / static_cast<double>(i);
  return 2.0 * h - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

namespace {

struct TreeBuilder {
  const DenseMatrix& points;
  IsoTree& tree;
  SeededRng& rng;
  size_t depth_cap;

  // Builds the node for `rows` and returns its index.
  int32_t build(std::vector<size_t>& rows, size_t depth) {
    const int32_t node_index = static_cast<int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_index].size = static_cast<uint32_t>(rows.size());
    if (rows.size() <= 1 || depth >= depth_cap) return node_index;

    // candidate dimensions must have spread
    std::vector<size_t> usable;
    std::vector<std::pair<double, double>> ranges(points.cols);
    for (size_t d = 0; d < points.cols; ++d) {
      double lo = points.at(rows[0], d), hi = lo;
      for (size_t r : rows) {
        lo = std::min(lo, points.at(r, d));
        hi = std::max(hi, points.at(r, d));
      }
      ranges[d] = {lo, hi};
      if (hi > lo) usable.push_back(d);
    }
    if (usable.empty()) return node_index;  // all points identical

    const size_t dim = usable[static_cast<size_t>(rng.below(usable.size()))];
    const auto [lo, hi] = ranges[dim];
    const double threshold = lo + (hi - lo) * rng.uniform();

    std::vector<size_t> left_rows, right_rows;
    for (size_t r : rows)
      (points.at(r, dim) < threshold ? left_rows : right_rows).push_back(r);
    if (left_rows.empty() || right_rows.empty()) {
      // threshold collapsed onto the boundary under rounding; keep the leaf
      return node_index;
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[node_index].split_dim = static_cast<int32_t>(dim);
    tree.nodes[node_index].threshold = threshold;
    const int32_t left = build(left_rows, depth + 1);
    tree.nodes[node_index].left = left;
    const int32_t right = build(right_rows, depth + 1);
    tree.nodes[node_index].right = right;
    return node_index;
  }
};

double path_length(const IsoTree& tree, std::span<const double> point) {
  double depth = 0.0;
  int32_t node = 0;
  while (tree.nodes[node].left >= 0) {
    const auto& n = tree.nodes[node];
    node = point[static_cast<size_t>(n.split_dim)] < n.threshold ? n.left : n.right;
    depth += 1.0;
  }
  return depth + average_path_length(tree.nodes[node].size);
}

}  // namespace

IsoForest fit_forest(const DenseMatrix& points, const IsoForestParams& params) {
  if (points.rows < 2) throw insufficient_data_error("fit_forest: need at least 2 points");
  if (params.tree_count == 0) throw parameter_error("fit_forest: need at least 1 tree");
  if (params.subsample < 2) throw parameter_error("fit_forest: subsample must be >= 2");

  IsoForest forest;
  forest.params = params;
  forest.dim = points.cols;
  forest.sample_size = std::min(params.subsample, points.rows);
  const size_t depth_cap = static_cast<size_t>(
      std::ceil(std::log2(static_cast<double>(forest.sample_size))));
  forest.trees.resize(params.tree_count);

  SeededRng master(params.seed);
  std::vector<uint64_t> tree_seeds(params.tree_count);
  for (size_t t = 0; t < params.tree_count; ++t) tree_seeds[t] = master.derive(t).seed();

  parallel_for(0, params.tree_count, [&](size_t t) {
    SeededRng rng(tree_seeds[t]);
    // subsample without replacement: partial Fisher-Yates
    std::vector<size_t> perm(points.rows);
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = 0; i < forest.sample_size; ++i) {
      const size_t j = i + static_cast<size_t>(rng.below(perm.size() - i));
      std::swap(perm[i], perm[j]);
    }
    std::vector<size_t> rows(perm.begin(), perm.begin() + forest.sample_size);
    TreeBuilder builder{points, forest.trees[t], rng, depth_cap};
    builder.build(rows, 0);
  });
  return forest;
}

double anomaly_score(const IsoForest& forest, std::span<const double> point) {
  if (point.size() != forest.dim)
    throw shape_error("anomaly_score: point dim " + std::to_string(point.size()) +
                      " does not match forest dim " + std::to_string(forest.dim));
  double mean_path = 0.0;
  for (const auto& tree : forest.trees) mean_path += path_length(tree, point);
  mean_path /= static_cast<double>(forest.trees.size());
  return std::pow(2.0, -mean_path / average_path_length(forest.sample_size));
}

std::vector<double> anomaly_scores(const IsoForest& forest, const DenseMatrix& points) {
  std::vector<double> scores(points.rows);
  parallel_for(0, points.rows,
               [&](size_t r) { scores[r] = anomaly_score(forest, points.row_span(r)); });
  return scores;
}

std::vector<size_t> flag_outliers(std::span<const double> scores, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw parameter_error("flag_outliers: q must be in (0, 1]");
  if (scores.empty()) return {};
  const size_t want = static_cast<size_t>(
      std::ceil(q * static_cast<double>(scores.size())));
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];  // stable: ties keep input order
  });
  order.resize(std::min(want, order.size()));
  return order;
}

std::vector<ClassScoreSummary> class_score_summary(std::span<const double> scores,
                                                   std::span<const std::string> labels) {
  std::vector<ClassScoreSummary> out;
  std::unordered_map<std::string, size_t> index;
  std::vector<std::vector<double>> grouped;
  for (size_t i = 0; i < scores.size(); ++i) {
    const std::string cls =
        (i < labels.size() && !labels[i].empty()) ? labels[i] : std::string("unknown");
    auto [it, fresh] = index.emplace(cls, grouped.size());
    if (fresh) {
      grouped.emplace_back();
      out.push_back({cls, 0.0, 0.0, 0});
    }
    grouped[it->second].push_back(scores[i]);
  }
  for (size_t g = 0; g < grouped.size(); ++g) {
    auto& values = grouped[g];
    out[g].count = values.size();
    const bool constant =
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    if (constant) {
      out[g].variance = 0.0;  // exact, regardless of mean rounding
    } else {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      out[g].variance = var / static_cast<double>(values.size());
    }
    out[g].median = lower_median(values);
  }
  return out;
}

AnomalyReport make_anomaly_report(const IsoForest& forest, const DenseMatrix& points,
                                  std::span<const std::string> ids, double quantile,
                                  std::span<const std::string> labels,
                                  const std::string& representation) {
  if (ids.size() != points.rows)
    throw shape_error("make_anomaly_report: id count does not match points");
  AnomalyReport report;
  report.params = forest.params;
  report.representation = representation;
  report.quantile = quantile;
  report.ids.assign(ids.begin(), ids.end());
  report.scores = anomaly_scores(forest, points);
  report.flagged = flag_outliers(report.scores, quantile);
  if (!labels.empty())
    report.class_summary = class_score_summary(report.scores, labels);
  return report;
}

}  // namespace xalign
