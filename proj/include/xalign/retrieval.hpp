#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "xalign/matrix.hpp"

namespace xalign {

// Rank of the true match inside one similarity row, 1-based. Strictly-greater
// similarities outrank; ties are broken by candidate order (earlier index
// wins), which keeps evaluation deterministic.
size_t rank_of_match(std::span<const double> sims, size_t true_index);

// ceil(k_percent/100 * candidate_count) cutoff; fraction of ranks <= cutoff.
double recall_at_percent(std::span<const size_t> ranks, double k_percent,
                         size_t candidate_count);

// Lower median: the order statistic at index ceil(n/2) (1-based).
double median_rank(std::span<const size_t> ranks);
double lower_median(std::vector<double> values);

std::vector<std::pair<double, double>> recall_curve(std::span<const size_t> ranks,
                                                    size_t candidate_count,
                                                    std::span<const double> k_grid);

struct RetrievalReport {
  size_t candidate_count = 0;
  std::vector<size_t> ranks;                       // per query
  std::vector<std::pair<double, double>> recall_at;  // (k%, recall)
  double median = 0.0;
};

// Queries are rows; true match for row i is candidate true_indices[i]
// (identity when empty).
RetrievalReport evaluate_retrieval(const DenseMatrix& sims,
                                   std::span<const size_t> true_indices,
                                   std::span<const double> k_grid);

inline constexpr std::array<double, 6> kDefaultRecallGrid = {1, 5, 10, 20, 50, 100};

}  // namespace xalign
