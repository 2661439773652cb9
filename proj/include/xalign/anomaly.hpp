#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xalign/matrix.hpp"

namespace xalign {

struct IsoForestParams {
  size_t tree_count = 100;
  size_t subsample = 256;  // psi
  uint64_t seed = 1;
};

// Axis-aligned random partition tree. Leaves keep the point count for the
// path-length adjustment.
struct IsoTree {
  struct Node {
    int32_t left = -1;       // -1 marks a leaf
    int32_t right = -1;
    int32_t split_dim = -1;
    double threshold = 0.0;
    uint32_t size = 0;
  };
  std::vector<Node> nodes;  // node 0 is the root
};

struct IsoForest {
  IsoForestParams params;
  size_t dim = 0;
  size_t sample_size = 0;  // min(psi, N); normalizes the score
  std::vector<IsoTree> trees;
};

// Average unsuccessful-search path length c(n) = 2 H(n-1) - 2(n-1)/n,
// c(1) = 0, c(2) = 1.
double average_path_length(size_t n);

// Each tree grows on a seeded subsample; split dimension uniform over the
// non-constant dimensions, threshold uniform in (min, max), recursion stops
// at depth ceil(log2 sample_size), single points, or all-identical points.
IsoForest fit_forest(const DenseMatrix& points, const IsoForestParams& params);

// s = 2^(-E[h]/c(sample_size)) with the leaf-size adjustment h += c(size).
double anomaly_score(const IsoForest& forest, std::span<const double> point);
std::vector<double> anomaly_scores(const IsoForest& forest, const DenseMatrix& points);

// Indices of the ceil(q*N) highest scores; ties break by input order.
std::vector<size_t> flag_outliers(std::span<const double> scores, double q = 0.01);

struct ClassScoreSummary {
  std::string class_name;
  double median = 0.0;
  double variance = 0.0;  // population variance
  size_t count = 0;
};

// Per-class score statistics; scored ids without a label group as "unknown".
// Classes report in first-appearance order.
std::vector<ClassScoreSummary> class_score_summary(std::span<const double> scores,
                                                   std::span<const std::string> labels);

struct AnomalyReport {
  IsoForestParams params;
  std::string representation;
  double quantile = 0.01;
  std::vector<std::string> ids;
  std::vector<double> scores;        // aligned with ids
  std::vector<size_t> flagged;       // indices into ids, highest score first
  std::vector<ClassScoreSummary> class_summary;  // empty without labels
};

AnomalyReport make_anomaly_report(const IsoForest& forest, const DenseMatrix& points,
                                  std::span<const std::string> ids, double quantile,
                                  std::span<const std::string> labels,
                                  const std::string& representation);

}  // namespace xalign
