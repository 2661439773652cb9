#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xalign/dataset.hpp"
#include "xalign/matrix.hpp"
#include "xalign/mlp.hpp"

namespace xalign {

enum class LossDirection { TextToData, Symmetric };

const char* loss_direction_name(LossDirection d);
LossDirection parse_loss_direction(const std::string& name);

// Contrastive alignment configuration. Two projection heads map each modality
// into the shared space; the loss anchors on texts (or both directions when
// symmetric).
struct AlignmentConfig {
  size_t shared_dim = 64;
  MlpSpec spectral_head;      // input_dim = spectral embedding dim
  MlpSpec text_head;          // input_dim = text embedding dim
  double lr = 1e-3;
  double dropout = 0.1;
  size_t batch_size = 64;
  size_t max_epochs = 120;
  size_t patience = 10;
  std::vector<double> temperature_grid = {0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
  double init_temperature = 0.3;   // training-time tau before calibration tuning
  uint64_t seed = 1;
  LossDirection direction = LossDirection::TextToData;

  static AlignmentConfig defaults(size_t spectral_dim, size_t text_dim);

  // Re-derives head specs after shared_dim/dropout/hidden edits.
  void rebuild_heads(size_t spectral_dim, size_t text_dim,
                     const std::vector<size_t>& spectral_hidden,
                     const std::vector<size_t>& text_hidden);

  void validate() const;
};

struct AlignmentModel {
  MlpSpec spectral_spec;
  MlpSpec text_spec;
  MlpParams spectral_head;
  MlpParams text_head;
  double temperature = 0.1;

  size_t shared_dim() const noexcept { return spectral_spec.output_dim; }

  std::vector<double> project_spectral(std::span<const double> embedding) const;
  std::vector<double> project_text(std::span<const double> embedding) const;
  DenseMatrix project_spectral_rows(const DenseMatrix& embeddings) const;
  DenseMatrix project_text_rows(const DenseMatrix& embeddings) const;
};

struct TrainLog {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_top1;    // per epoch
  size_t best_epoch = 0;           // 1-based; 0 = initial parameters
};

// Cosine similarity; positive-norm inputs only.
double cosine_sim(std::span<const double> x, std::span<const double> y);

// Rows of `queries` against rows of `candidates`: out[i][j] = cos(q_i, c_j).
DenseMatrix cosine_similarity_matrix(const DenseMatrix& queries,
                                     const DenseMatrix& candidates);

// InfoNCE over a precomputed similarity matrix (rows anchor texts, columns
// data). Returns the loss and d(loss)/d(sims); log-sum-exp is shifted by the
// row/column max for stability.
struct InfoNceSimGrad {
  double loss = 0.0;
  DenseMatrix dloss_dsims;
};
InfoNceSimGrad info_nce_from_sims(const DenseMatrix& sims, double tau, LossDirection dir);

// InfoNCE over projected batches: matched pairs sit on the diagonal.
// Gradients are with respect to the projections themselves.
struct InfoNceResult {
  double loss = 0.0;
  DenseMatrix grad_texts;  // N x d
  DenseMatrix grad_data;   // N x d
};
InfoNceResult info_nce(const DenseMatrix& projected_texts, const DenseMatrix& projected_data,
                       double tau, LossDirection dir);

// One gradient evaluation of loss(heads | batch): forwards both heads over
// the batch rows, runs InfoNCE, and backpropagates into both heads. The
// training loop applies Adam on top of this; tests difference it directly.
struct AlignmentBatchGrads {
  double loss = 0.0;
  MlpGrads spectral;
  MlpGrads text;
};
AlignmentBatchGrads alignment_batch_gradients(const AlignmentModel& model,
                                              const DenseMatrix& text_batch,
                                              const DenseMatrix& spectral_batch, double tau,
                                              LossDirection dir, RunMode mode,
                                              SeededRng* rng);

// Spectrum->text retrieval recall over one split (rank-1 fraction).
double validation_top1_recall(const AlignmentModel& model, const DatasetStore& store,
                              Split split);
double recall_at_1_percent(const AlignmentModel& model, const DatasetStore& store,
                           Split split);

// Mean InfoNCE loss over row-order batches at eval-mode projections.
double mean_info_nce_loss(const AlignmentModel& model, const DatasetStore& store, Split split,
                          double tau, LossDirection dir, size_t batch_size);

// Mini-batch InfoNCE training with in-batch negatives, Adam on both heads,
// early stopping on validation top-1 recall. Returns the best-epoch model.
std::pair<AlignmentModel, TrainLog> train_alignment(const AlignmentConfig& config,
                                                    const DatasetStore& store);

// Argmax of recall over the grid, ties to the smallest temperature.
double select_temperature(std::span<const double> grid,
                          const std::function<double(double)>& recall_at_tau);

// Calibration-set temperature tuning. Default mode re-evaluates the trained
// model at each tau (cosine ranking makes recall tau-invariant, so the tie
// rule picks the smallest grid value); retrain_per_tau trains a fresh model
// per grid point with init_temperature = tau and keeps the best.
struct TemperatureTuneResult {
  double temperature = 0.0;
  std::vector<std::pair<double, double>> recalls;  // (tau, calibration top-1)
};
TemperatureTuneResult tune_temperature(AlignmentModel& model, const DatasetStore& store,
                                       const AlignmentConfig& config, bool retrain_per_tau);

// Grid search over {lr, shared_dim, dropout, hidden_dims}, ranked by
// validation Recall@1%. Per-config seeds derive from the master seed by
// config index; failed configs are reported, not fatal.
struct GridSpace {
  std::vector<double> lr = {1e-3};
  std::vector<size_t> shared_dim = {64};
  std::vector<double> dropout = {0.1};
  std::vector<std::vector<size_t>> hidden_dims = {{256}};

  void validate() const;  // paper search-space bounds
};

std::vector<AlignmentConfig> expand_grid(const GridSpace& space, const AlignmentConfig& base,
                                         size_t spectral_dim, size_t text_dim);

struct GridEntry {
  size_t config_index = 0;  // position in the expanded grid
  AlignmentConfig config;
  TrainLog log;
  double recall_1pct = 0.0;
};
struct GridFailure {
  size_t config_index = 0;
  std::string error;
};
struct GridSearchResult {
  std::vector<GridEntry> ranked;          // best first
  std::vector<AlignmentModel> models;     // aligned with `ranked`
  std::vector<GridFailure> failures;
};

GridSearchResult run_grid(const std::vector<AlignmentConfig>& configs,
                          const DatasetStore& store, uint64_t master_seed);
GridSearchResult grid_search(const GridSpace& space, const DatasetStore& store,
                             const AlignmentConfig& base, uint64_t master_seed);

// Elementwise mean of per-model cosine-similarity matrices;
// out[i][j] = mean_k cos(text_head_k(texts_i), spectral_head_k(data_j)).
DenseMatrix ensemble_similarity(const std::vector<const AlignmentModel*>& models,
                                const DenseMatrix& texts, const DenseMatrix& data);

}  // namespace xalign
