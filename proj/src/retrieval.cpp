#include "xalign/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "xalign/errors.hpp"
#include "xalign/parallel.hpp"

namespace xalign {

size_t rank_of_match(std::span<const double> sims, size_t true_index) {
  if (sims.empty()) throw parameter_error("rank_of_match: empty similarity row");
  if (true_index >= sims.size())
    throw parameter_error("rank_of_match: true_index " + std::to_string(true_index) +
                          " out of bounds for " + std::to_string(sims.size()) +
                          " candidates");
  const double s_true = sims[true_index];
  size_t rank = 1;
  for (size_t j = 0; j < sims.size(); ++j) {
    if (sims[j] > s_true) ++rank;
    else if (sims[j] == s_true && j < true_index) ++rank;
  }
  return rank;
}

double recall_at_percent(std::span<const size_t> ranks, double k_percent,
                         size_t candidate_count) {
  if (ranks.empty()) throw parameter_error("recall_at_percent: empty rank list");
  if (!(k_percent > 0.0 && k_percent <= 100.0))
    throw parameter_error("recall_at_percent: k must be in (0, 100]");
  const size_t cutoff = static_cast<size_t>(
      std::ceil(k_percent / 100.0 * static_cast<double>(candidate_count)));
  size_t hits = 0;
  for (size_t r : ranks)
    if (r <= cutoff) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw parameter_error("median: empty input");
  const size_t k = (values.size() + 1) / 2;  // ceil(n/2), 1-based order statistic
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

double median_rank(std::span<const size_t> ranks) {
  std::vector<double> v(ranks.begin(), ranks.end());
  return lower_median(std::move(v));
}

std::vector<std::pair<double, double>> recall_curve(std::span<const size_t> ranks,
                                                    size_t candidate_count,
                                                    std::span<const double> k_grid) {
  for (size_t i = 1; i < k_grid.size(); ++i)
    if (k_grid[i] < k_grid[i - 1])
      throw parameter_error("recall_curve: k grid must be sorted ascending");
  std::vector<std::pair<double, double>> curve;
  curve.reserve(k_grid.size());
  for (double k : k_grid)
    curve.emplace_back(k, recall_at_percent(ranks, k, candidate_count));
  return curve;
}

RetrievalReport evaluate_retrieval(const DenseMatrix& sims,
                                   std::span<const size_t> true_indices,
                                   std::span<const double> k_grid) {
  if (sims.rows == 0 || sims.cols == 0)
    throw parameter_error("evaluate_retrieval: empty similarity matrix");
  if (!true_indices.empty() && true_indices.size() != sims.rows)
    throw parameter_error("evaluate_retrieval: true index count does not match queries");

  RetrievalReport report;
  report.candidate_count = sims.cols;
  report.ranks.resize(sims.rows);
  parallel_for(0, sims.rows, [&](size_t i) {
    const size_t t = true_indices.empty() ? i : true_indices[i];
    report.ranks[i] = rank_of_match(sims.row_span(i), t);
  });
  report.recall_at = recall_curve(report.ranks, report.candidate_count, k_grid);
  report.median = median_rank(report.ranks);
  return report;
}

}  // namespace xalign
