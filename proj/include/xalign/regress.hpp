#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xalign/align.hpp"
#include "xalign/dataset.hpp"
#include "xalign/matrix.hpp"

namespace xalign {

// The five representations compared by the mixture-of-experts selection,
// in tie-breaking precedence order (fused and aligned first).
enum class ReprKind : uint8_t {
  PostBoth = 0,
  PostSpectra = 1,
  PostText = 2,
  PreSpectra = 3,
  PreText = 4,
};
inline constexpr std::array<ReprKind, 5> kMoePrecedence = {
    ReprKind::PostBoth, ReprKind::PostSpectra, ReprKind::PostText, ReprKind::PreSpectra,
    ReprKind::PreText};

const char* repr_name(ReprKind kind);
ReprKind parse_repr(const std::string& name);

// Row-aligned with a DatasetStore (same source order).
struct RepresentationSet {
  DenseMatrix pre_spectra;   // N x spectral_dim
  DenseMatrix pre_text;      // N x text_dim
  DenseMatrix post_spectra;  // N x shared_dim
  DenseMatrix post_text;     // N x shared_dim
  DenseMatrix post_both;     // N x 2*shared_dim, [post_spectra | post_text]

  const DenseMatrix& get(ReprKind kind) const;
};

RepresentationSet build_representations(const DatasetStore& store,
                                        const AlignmentModel& model);

// Unweighted mean of the k nearest training targets under Euclidean
// distance; distance ties break by training-point order.
std::vector<double> knn_regress(const DenseMatrix& train_points,
                                std::span<const double> train_targets,
                                const DenseMatrix& queries, size_t k);

// Mean absolute error over paired values.
double mae(std::span<const double> predictions, std::span<const double> truths);

struct PearsonResult {
  double rho = 0.0;
  bool degenerate = false;  // a constant input; rho forced to 0
};
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationEntry {
  size_t dim = 0;
  std::string variable;
  double abs_rho = 0.0;
  bool degenerate = false;
};

// |Pearson| between every latent dimension and every physical variable over
// non-missing rows, sorted descending; ties order by (dim, variable name).
std::vector<CorrelationEntry> correlation_table(const DenseMatrix& latents,
                                                const DatasetStore& store, size_t top_n);

enum class MoeMetric { Pearson, Mae };

struct MoeChoice {
  ReprKind kind = ReprKind::PostBoth;
  bool skipped = false;                       // variable unusable on validation
  std::array<double, 5> validation_scores{};  // indexed by ReprKind
};

// Per-variable representation selection: k-NN (train split) evaluated on the
// validation split, argmax of Pearson(prediction, truth) with the fixed
// precedence order on ties. MoeMetric::Mae selects by lowest validation MAE.
MoeChoice moe_select(const RepresentationSet& reps, const DatasetStore& store,
                     size_t variable, size_t k = 3, MoeMetric metric = MoeMetric::Pearson,
                     bool standardize = false);

struct VariableReport {
  std::string variable;
  bool skipped = false;
  std::string skip_reason;
  size_t train_count = 0;
  size_t validation_count = 0;
  size_t test_count = 0;
  double mean_baseline = 0.0;                     // predict the validation mean
  std::array<std::optional<double>, 5> test_mae;  // indexed by ReprKind
  ReprKind moe_choice = ReprKind::PostBoth;
  double moe_mae = 0.0;
  double uncertainty = 0.0;  // bootstrap 95% CI half-width of the MoE test MAE
  std::optional<double> improvement_pct;  // vs best pre-alignment modality
};

struct RegressionOptions {
  size_t k = 3;
  MoeMetric moe_metric = MoeMetric::Pearson;
  bool standardize = false;
  size_t bootstrap_n = 1000;
  uint64_t seed = 1;
};

struct RegressionReport {
  std::vector<VariableReport> variables;
  RegressionOptions options;
};

RegressionReport regression_report(const RepresentationSet& reps, const DatasetStore& store,
                                   const RegressionOptions& options);

}  // namespace xalign
