#include "xalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xalign/adam.hpp"
#include "xalign/errors.hpp"
#include "xalign/kernels.hpp"
#include "xalign/parallel.hpp"
#include "xalign/retrieval.hpp"

namespace xalign {

const char* loss_direction_name(LossDirection d) {
  return d == LossDirection::TextToData ? "text_to_data" : "symmetric";
}

LossDirection parse_loss_direction(const std::string& name) {
  if (name == "text_to_data") return LossDirection::TextToData;
  if (name == "symmetric") return LossDirection::Symmetric;
  throw parameter_error("unknown loss direction '" + name + "'");
}

AlignmentConfig AlignmentConfig::defaults(size_t spectral_dim, size_t text_dim) {
  AlignmentConfig c;
  c.rebuild_heads(spectral_dim, text_dim, {256}, {256});
  return c;
}

void AlignmentConfig::rebuild_heads(size_t spectral_dim, size_t text_dim,
                                    const std::vector<size_t>& spectral_hidden,
                                    const std::vector<size_t>& text_hidden) {
  spectral_head = MlpSpec{spectral_dim, spectral_hidden, shared_dim, dropout};
  text_head = MlpSpec{text_dim, text_hidden, shared_dim, dropout};
}

void AlignmentConfig::validate() const {
  spectral_head.validate();
  text_head.validate();
  if (spectral_head.output_dim != shared_dim || text_head.output_dim != shared_dim)
    throw config_error("alignment config: head output dims must equal shared_dim");
  if (spectral_head.hidden_dims.empty() || text_head.hidden_dims.empty())
    throw config_error("alignment config: projection heads need at least one hidden layer");
  if (batch_size < 2) throw parameter_error("alignment config: batch_size must be >= 2");
  if (!(lr > 0)) throw parameter_error("alignment config: lr must be positive");
  if (temperature_grid.empty())
    throw parameter_error("alignment config: temperature_grid must be non-empty");
  for (double t : temperature_grid)
    if (!(t > 0)) throw parameter_error("alignment config: temperatures must be positive");
  if (!(init_temperature > 0))
    throw parameter_error("alignment config: init_temperature must be positive");
}

std::vector<double> AlignmentModel::project_spectral(std::span<const double> e) const {
  return mlp_forward(spectral_spec, spectral_head, e, RunMode::Eval);
}

std::vector<double> AlignmentModel::project_text(std::span<const double> e) const {
  return mlp_forward(text_spec, text_head, e, RunMode::Eval);
}

namespace {

DenseMatrix project_rows(const MlpSpec& spec, const MlpParams& params,
                         const DenseMatrix& rows) {
  DenseMatrix out(rows.rows, spec.output_dim);
  parallel_for(0, rows.rows, [&](size_t r) {
    const auto p = mlp_forward(spec, params, rows.row_span(r), RunMode::Eval);
    std::copy(p.begin(), p.end(), out.row(r));
  });
  return out;
}

}  // namespace

DenseMatrix AlignmentModel::project_spectral_rows(const DenseMatrix& embeddings) const {
  return project_rows(spectral_spec, spectral_head, embeddings);
}

DenseMatrix AlignmentModel::project_text_rows(const DenseMatrix& embeddings) const {
  return project_rows(text_spec, text_head, embeddings);
}

double cosine_sim(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw shape_error("cosine_sim: length mismatch " + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()));
  const double nx = kernels::nrm2sq(x.data(), x.size());
  const double ny = kernels::nrm2sq(y.data(), y.size());
  if (nx == 0.0 || ny == 0.0)
    throw numeric_error("cosine_sim: undefined for a zero vector");
  return kernels::dot(x.data(), y.data(), x.size()) / std::sqrt(nx * ny);
}

DenseMatrix cosine_similarity_matrix(const DenseMatrix& queries,
                                     const DenseMatrix& candidates) {
  if (queries.cols != candidates.cols)
    throw shape_error("cosine_similarity_matrix: dimension mismatch");
  std::vector<double> qnorm(queries.rows), cnorm(candidates.rows);
  for (size_t i = 0; i < queries.rows; ++i) {
    qnorm[i] = std::sqrt(kernels::nrm2sq(queries.row(i), queries.cols));
    if (qnorm[i] == 0.0) throw numeric_error("cosine_similarity_matrix: zero query row");
  }
  for (size_t j = 0; j < candidates.rows; ++j) {
    cnorm[j] = std::sqrt(kernels::nrm2sq(candidates.row(j), candidates.cols));
    if (cnorm[j] == 0.0) throw numeric_error("cosine_similarity_matrix: zero candidate row");
  }
  DenseMatrix sims(queries.rows, candidates.rows);
  parallel_for(0, queries.rows, [&](size_t i) {
    double* out = sims.row(i);
    for (size_t j = 0; j < candidates.rows; ++j)
      out[j] = kernels::dot(queries.row(i), candidates.row(j), queries.cols) /
               (qnorm[i] * cnorm[j]);
  });
  return sims;
}

InfoNceSimGrad info_nce_from_sims(const DenseMatrix& sims, double tau, LossDirection dir) {
  if (!(tau > 0)) throw parameter_error("info_nce: temperature must be positive");
  if (sims.rows != sims.cols || sims.rows < 2)
    throw parameter_error("info_nce: need a square similarity matrix with N >= 2");
  const size_t n = sims.rows;
  for (double v : sims.data)
    if (!std::isfinite(v)) throw numeric_error("info_nce: non-finite similarity");

  InfoNceSimGrad out;
  out.dloss_dsims = DenseMatrix(n, n);
  const double inv_ntau = 1.0 / (static_cast<double>(n) * tau);

  // text-anchored: softmax across each row
  double loss_rows = 0.0;
  {
    std::vector<double> p(n);
    for (size_t i = 0; i < n; ++i) {
      const double* row = sims.row(i);
      double mx = row[0];
      for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
      double z = 0.0;
      for (size_t j = 0; j < n; ++j) {
        p[j] = std::exp((row[j] - mx) / tau);
        z += p[j];
      }
      loss_rows += std::log(z) - (row[i] - mx) / tau;
      double* g = out.dloss_dsims.row(i);
      for (size_t j = 0; j < n; ++j) g[j] = (p[j] / z - (i == j ? 1.0 : 0.0)) * inv_ntau;
    }
    loss_rows /= static_cast<double>(n);
  }

  if (dir == LossDirection::TextToData) {
    out.loss = loss_rows;
    return out;
  }

  // symmetric: add the data-anchored direction (softmax across columns)
  double loss_cols = 0.0;
  {
    std::vector<double> p(n);
    for (size_t j = 0; j < n; ++j) {
      double mx = sims.at(0, j);
      for (size_t i = 1; i < n; ++i) mx = std::max(mx, sims.at(i, j));
      double z = 0.0;
      for (size_t i = 0; i < n; ++i) {
        p[i] = std::exp((sims.at(i, j) - mx) / tau);
        z += p[i];
      }
      loss_cols += std::log(z) - (sims.at(j, j) - mx) / tau;
      for (size_t i = 0; i < n; ++i)
        out.dloss_dsims.at(i, j) =
            0.5 * (out.dloss_dsims.at(i, j) + (p[i] / z - (i == j ? 1.0 : 0.0)) * inv_ntau);
    }
    loss_cols /= static_cast<double>(n);
  }
  out.loss = 0.5 * (loss_rows + loss_cols);
  return out;
}

InfoNceResult info_nce(const DenseMatrix& projected_texts, const DenseMatrix& projected_data,
                       double tau, LossDirection dir) {
  if (projected_texts.rows != projected_data.rows ||
      projected_texts.cols != projected_data.cols)
    throw shape_error("info_nce: projection shape mismatch");
  const size_t n = projected_texts.rows;
  const size_t d = projected_texts.cols;
  if (n < 2) throw parameter_error("info_nce: need at least 2 pairs");

  // unit-normalized copies, norms kept for the chain rule
  DenseMatrix that(n, d), dhat(n, d);
  std::vector<double> tnorm(n), dnorm(n);
  for (size_t i = 0; i < n; ++i) {
    tnorm[i] = std::sqrt(kernels::nrm2sq(projected_texts.row(i), d));
    dnorm[i] = std::sqrt(kernels::nrm2sq(projected_data.row(i), d));
    if (tnorm[i] == 0.0 || dnorm[i] == 0.0)
      throw numeric_error("info_nce: zero-norm projection row " + std::to_string(i));
    for (size_t c = 0; c < d; ++c) {
      that.at(i, c) = projected_texts.at(i, c) / tnorm[i];
      dhat.at(i, c) = projected_data.at(i, c) / dnorm[i];
    }
  }

  DenseMatrix sims(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      sims.at(i, j) = kernels::dot(that.row(i), dhat.row(j), d);

  const auto sim_grad = info_nce_from_sims(sims, tau, dir);
  const DenseMatrix& g = sim_grad.dloss_dsims;

  InfoNceResult out;
  out.loss = sim_grad.loss;
  out.grad_texts = DenseMatrix(n, d);
  out.grad_data = DenseMatrix(n, d);

  // d sim(i,j) / d t_i = (dhat_j - sims_ij * that_i) / |t_i|
  for (size_t i = 0; i < n; ++i) {
    double* gt = out.grad_texts.row(i);
    kernels::gemv_t(dhat.data.data(), n, d, g.row(i), gt);  // sum_j g_ij dhat_j
    const double coupling = kernels::dot(g.row(i), sims.row(i), n);
    kernels::axpy(-coupling, that.row(i), gt, d);
    kernels::scale(1.0 / tnorm[i], gt, d);
  }
  const DenseMatrix gt_t = transpose(g);
  const DenseMatrix sims_t = transpose(sims);
  for (size_t j = 0; j < n; ++j) {
    double* gd = out.grad_data.row(j);
    kernels::gemv_t(that.data.data(), n, d, gt_t.row(j), gd);  // sum_i g_ij that_i
    const double coupling = kernels::dot(gt_t.row(j), sims_t.row(j), n);
    kernels::axpy(-coupling, dhat.row(j), gd, d);
    kernels::scale(1.0 / dnorm[j], gd, d);
  }
  return out;
}

AlignmentBatchGrads alignment_batch_gradients(const AlignmentModel& model,
                                              const DenseMatrix& text_batch,
                                              const DenseMatrix& spectral_batch, double tau,
                                              LossDirection dir, RunMode mode,
                                              SeededRng* rng) {
  if (text_batch.rows != spectral_batch.rows)
    throw shape_error("alignment_batch_gradients: batch row mismatch");
  const size_t n = text_batch.rows;
  const size_t d = model.shared_dim();

  DenseMatrix proj_text(n, d), proj_spec(n, d);
  std::vector<MlpCache> text_caches(n), spec_caches(n);
  for (size_t i = 0; i < n; ++i) {
    const auto pt = mlp_forward(model.text_spec, model.text_head, text_batch.row_span(i),
                                mode, rng, &text_caches[i]);
    const auto ps = mlp_forward(model.spectral_spec, model.spectral_head,
                                spectral_batch.row_span(i), mode, rng, &spec_caches[i]);
    std::copy(pt.begin(), pt.end(), proj_text.row(i));
    std::copy(ps.begin(), ps.end(), proj_spec.row(i));
  }

  const auto nce = info_nce(proj_text, proj_spec, tau, dir);

  AlignmentBatchGrads out;
  out.loss = nce.loss;
  out.text = MlpGrads::zeros(model.text_spec);
  out.spectral = MlpGrads::zeros(model.spectral_spec);
  for (size_t i = 0; i < n; ++i) {
    mlp_backward(model.text_spec, model.text_head, text_caches[i],
                 nce.grad_texts.row_span(i), out.text);
    mlp_backward(model.spectral_spec, model.spectral_head, spec_caches[i],
                 nce.grad_data.row_span(i), out.spectral);
  }
  return out;
}

namespace {

struct SplitView {
  DenseMatrix text;
  DenseMatrix spectral;
};

SplitView gather_split(const DatasetStore& store, Split split) {
  const auto rows = store.split_rows(split);
  SplitView v;
  v.text = DenseMatrix(rows.size(), store.text.cols);
  v.spectral = DenseMatrix(rows.size(), store.spectral.cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy(store.text.row(rows[i]), store.text.row(rows[i]) + store.text.cols,
              v.text.row(i));
    std::copy(store.spectral.row(rows[i]), store.spectral.row(rows[i]) + store.spectral.cols,
              v.spectral.row(i));
  }
  return v;
}

// Spectrum queries against text candidates within one split.
std::vector<size_t> split_ranks(const AlignmentModel& model, const DatasetStore& store,
                                Split split) {
  const auto view = gather_split(store, split);
  if (view.text.rows == 0)
    throw insufficient_data_error(std::string("no rows in split ") + split_name(split));
  const DenseMatrix proj_spec = model.project_spectral_rows(view.spectral);
  const DenseMatrix proj_text = model.project_text_rows(view.text);
  const DenseMatrix sims = cosine_similarity_matrix(proj_spec, proj_text);
  std::vector<size_t> ranks(sims.rows);
  parallel_for(0, sims.rows, [&](size_t i) { ranks[i] = rank_of_match(sims.row_span(i), i); });
  return ranks;
}

}  // namespace

double validation_top1_recall(const AlignmentModel& model, const DatasetStore& store,
                              Split split) {
  const auto ranks = split_ranks(model, store, split);
  size_t hits = 0;
  for (size_t r : ranks)
    if (r == 1) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double recall_at_1_percent(const AlignmentModel& model, const DatasetStore& store,
                           Split split) {
  const auto ranks = split_ranks(model, store, split);
  return recall_at_percent(ranks, 1.0, ranks.size());
}

double mean_info_nce_loss(const AlignmentModel& model, const DatasetStore& store, Split split,
                          double tau, LossDirection dir, size_t batch_size) {
  const auto view = gather_split(store, split);
  const DenseMatrix proj_text = model.project_text_rows(view.text);
  const DenseMatrix proj_spec = model.project_spectral_rows(view.spectral);
  double weighted = 0.0;
  size_t counted = 0;
  for (size_t start = 0; start + 2 <= proj_text.rows; start += batch_size) {
    const size_t stop = std::min(proj_text.rows, start + batch_size);
    const size_t n = stop - start;
    if (n < 2) break;
    DenseMatrix t(n, proj_text.cols), s(n, proj_spec.cols);
    std::copy(proj_text.row(start), proj_text.row(start) + n * proj_text.cols, t.data.data());
    std::copy(proj_spec.row(start), proj_spec.row(start) + n * proj_spec.cols, s.data.data());
    const auto nce = info_nce(t, s, tau, dir);
    weighted += nce.loss * static_cast<double>(n);
    counted += n;
  }
  if (counted == 0) throw insufficient_data_error("mean_info_nce_loss: split too small");
  return weighted / static_cast<double>(counted);
}

std::pair<AlignmentModel, TrainLog> train_alignment(const AlignmentConfig& config,
                                                    const DatasetStore& store) {
  config.validate();
  if (store.spectral.cols != config.spectral_head.input_dim)
    throw config_error("train_alignment: spectral dim " + std::to_string(store.spectral.cols) +
                       " does not match head input " +
                       std::to_string(config.spectral_head.input_dim));
  if (store.text.cols != config.text_head.input_dim)
    throw config_error("train_alignment: text dim " + std::to_string(store.text.cols) +
                       " does not match head input " +
                       std::to_string(config.text_head.input_dim));

  SeededRng master(config.seed);
  SeededRng init_rng = master.derive(1);
  SeededRng order_rng = master.derive(2);
  SeededRng dropout_rng = master.derive(3);

  AlignmentModel model;
  model.spectral_spec = config.spectral_head;
  model.text_spec = config.text_head;
  model.spectral_head = MlpParams::init(config.spectral_head, init_rng);
  model.text_head = MlpParams::init(config.text_head, init_rng);
  model.temperature = config.init_temperature;

  auto spec_views = mlp_param_views(model.spectral_head, "spectral_head");
  auto text_views = mlp_param_views(model.text_head, "text_head");
  std::vector<ParamView> views;
  views.insert(views.end(), spec_views.begin(), spec_views.end());
  views.insert(views.end(), text_views.begin(), text_views.end());
  AdamState adam = AdamState::for_blocks(views, config.lr);

  const auto train_rows = store.split_rows(Split::Train);
  if (train_rows.size() < 2)
    throw insufficient_data_error("train_alignment: need at least 2 training rows");

  TrainLog log;
  AlignmentModel best = model;
  double best_recall = validation_top1_recall(model, store, Split::Validation);
  size_t stale = 0;

  std::vector<size_t> order = train_rows;
  DenseMatrix text_batch, spec_batch;
  for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t loss_count = 0;

    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      const size_t n = stop - start;
      if (n < 2) break;  // InfoNCE needs in-batch negatives
      text_batch = DenseMatrix(n, store.text.cols);
      spec_batch = DenseMatrix(n, store.spectral.cols);
      for (size_t b = 0; b < n; ++b) {
        const size_t row = order[start + b];
        std::copy(store.text.row(row), store.text.row(row) + store.text.cols,
                  text_batch.row(b));
        std::copy(store.spectral.row(row), store.spectral.row(row) + store.spectral.cols,
                  spec_batch.row(b));
      }
      const auto grads =
          alignment_batch_gradients(model, text_batch, spec_batch, model.temperature,
                                    config.direction, RunMode::Train, &dropout_rng);
      if (!std::isfinite(grads.loss))
        throw training_error("train_alignment: diverged at epoch " + std::to_string(epoch));
      loss_sum += grads.loss * static_cast<double>(n);
      loss_count += n;

      auto spec_gv = mlp_grad_views(grads.spectral, "spectral_head");
      auto text_gv = mlp_grad_views(grads.text, "text_head");
      std::vector<GradView> gv;
      gv.insert(gv.end(), spec_gv.begin(), spec_gv.end());
      gv.insert(gv.end(), text_gv.begin(), text_gv.end());
      adam_step(adam, views, gv);
    }

    log.train_loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
    const double recall = validation_top1_recall(model, store, Split::Validation);
    log.val_top1.push_back(recall);

    if (recall > best_recall) {
      best_recall = recall;
      best = model;
      log.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
      if (config.patience > 0 && stale >= config.patience) break;
    }
  }

  best.temperature = config.init_temperature;
  return {std::move(best), std::move(log)};
}

double select_temperature(std::span<const double> grid,
                          const std::function<double(double)>& recall_at_tau) {
  if (grid.empty()) throw parameter_error("select_temperature: empty grid");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  double best_tau = sorted.front();
  double best_recall = -1.0;
  for (double tau : sorted) {
    const double r = recall_at_tau(tau);
    if (r > best_recall) {  // strict: ties keep the smaller tau
      best_recall = r;
      best_tau = tau;
    }
  }
  return best_tau;
}

TemperatureTuneResult tune_temperature(AlignmentModel& model, const DatasetStore& store,
                                       const AlignmentConfig& config, bool retrain_per_tau) {
  if (store.split_rows(Split::Calibration).empty())
    throw insufficient_data_error("tune_temperature: calibration split is empty");
  if (config.temperature_grid.empty())
    throw parameter_error("tune_temperature: empty temperature grid");

  TemperatureTuneResult result;
  std::vector<AlignmentModel> candidates;
  std::vector<double> sorted(config.temperature_grid.begin(), config.temperature_grid.end());
  std::sort(sorted.begin(), sorted.end());

  auto recall_fn = [&](double tau) {
    if (retrain_per_tau) {
      AlignmentConfig c = config;
      c.init_temperature = tau;
      auto [m, l] = train_alignment(c, store);
      const double r = validation_top1_recall(m, store, Split::Calibration);
      candidates.push_back(std::move(m));
      result.recalls.emplace_back(tau, r);
      return r;
    }
    // ranking by cosine similarity is invariant to tau; evaluated anyway so
    // the selection rule stays uniform
    const double r = validation_top1_recall(model, store, Split::Calibration);
    result.recalls.emplace_back(tau, r);
    return r;
  };

  const double tau = select_temperature(sorted, recall_fn);
  if (retrain_per_tau) {
    for (size_t i = 0; i < sorted.size(); ++i)
      if (sorted[i] == tau) model = std::move(candidates[i]);
  }
  model.temperature = tau;
  result.temperature = tau;
  return result;
}

void GridSpace::validate() const {
  if (lr.empty() || shared_dim.empty() || dropout.empty() || hidden_dims.empty())
    throw parameter_error("grid space: all axes must be non-empty");
  for (double v : lr)
    if (!(v >= 1e-4 && v <= 1e-3))
      throw parameter_error("grid space: lr must lie in [1e-4, 1e-3]");
  for (size_t v : shared_dim)
    if (v < 16 || v > 128)
      throw parameter_error("grid space: shared_dim must lie in [16, 128]");
  for (double v : dropout)
    if (!(v == 0.0 || (v >= 0.1 && v <= 0.5)))
      throw parameter_error("grid space: dropout must be 0 or in [0.1, 0.5]");
  for (const auto& h : hidden_dims) {
    if (h.empty()) throw parameter_error("grid space: hidden_dims entries must be non-empty");
    for (size_t v : h)
      if (v < 16 || v > 1024)
        throw parameter_error("grid space: hidden dims must lie in [16, 1024]");
  }
}

std::vector<AlignmentConfig> expand_grid(const GridSpace& space, const AlignmentConfig& base,
                                         size_t spectral_dim, size_t text_dim) {
  space.validate();
  std::vector<AlignmentConfig> configs;
  for (double lr : space.lr)
    for (size_t sd : space.shared_dim)
      for (double dr : space.dropout)
        for (const auto& hidden : space.hidden_dims) {
          AlignmentConfig c = base;
          c.lr = lr;
          c.shared_dim = sd;
          c.dropout = dr;
          c.rebuild_heads(spectral_dim, text_dim, hidden, hidden);
          configs.push_back(std::move(c));
        }
  return configs;
}

GridSearchResult run_grid(const std::vector<AlignmentConfig>& configs,
                          const DatasetStore& store, uint64_t master_seed) {
  if (configs.empty()) throw parameter_error("run_grid: empty configuration list");

  struct Slot {
    bool failed = false;
    std::string error;
    AlignmentModel model;
    TrainLog log;
    double recall = 0.0;
  };
  std::vector<Slot> slots(configs.size());
  SeededRng master(master_seed);
  std::vector<uint64_t> seeds(configs.size());
  for (size_t i = 0; i < configs.size(); ++i) seeds[i] = master.derive(i).seed();

  parallel_for(0, configs.size(), [&](size_t i) {
    AlignmentConfig c = configs[i];
    c.seed = seeds[i];
    try {
      auto [model, log] = train_alignment(c, store);
      slots[i].recall = recall_at_1_percent(model, store, Split::Validation);
      slots[i].model = std::move(model);
      slots[i].log = std::move(log);
    } catch (const std::exception& e) {
      slots[i].failed = true;
      slots[i].error = e.what();
    }
  });

  std::vector<size_t> ok;
  GridSearchResult result;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].failed)
      result.failures.push_back({i, slots[i].error});
    else
      ok.push_back(i);
  }
  std::stable_sort(ok.begin(), ok.end(), [&](size_t a, size_t b) {
    return slots[a].recall > slots[b].recall;  // ties keep config order
  });
  for (size_t i : ok) {
    GridEntry entry;
    entry.config_index = i;
    entry.config = configs[i];
    entry.config.seed = seeds[i];
    entry.log = std::move(slots[i].log);
    entry.recall_1pct = slots[i].recall;
    result.ranked.push_back(std::move(entry));
    result.models.push_back(std::move(slots[i].model));
  }
  return result;
}

GridSearchResult grid_search(const GridSpace& space, const DatasetStore& store,
                             const AlignmentConfig& base, uint64_t master_seed) {
  return run_grid(expand_grid(space, base, store.spectral.cols, store.text.cols), store,
                  master_seed);
}

DenseMatrix ensemble_similarity(const std::vector<const AlignmentModel*>& models,
                                const DenseMatrix& texts, const DenseMatrix& data) {
  if (models.empty()) throw parameter_error("ensemble_similarity: no models");
  DenseMatrix acc;
  for (const AlignmentModel* m : models) {
    const DenseMatrix proj_text = m->project_text_rows(texts);
    const DenseMatrix proj_data = m->project_spectral_rows(data);
    DenseMatrix sims = cosine_similarity_matrix(proj_text, proj_data);
    if (acc.empty())
      acc = std::move(sims);
    else {
      if (acc.rows != sims.rows || acc.cols != sims.cols)
        throw shape_error("ensemble_similarity: inconsistent matrix shapes");
      kernels::axpy(1.0, sims.data.data(), acc.data.data(), acc.data.size());
    }
  }
  kernels::scale(1.0 / static_cast<double>(models.size()), acc.data.data(), acc.data.size());
  return acc;
}

}  // namespace xalign
