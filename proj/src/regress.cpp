#include "xalign/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xalign/errors.hpp"
#include "xalign/kernels.hpp"
#include "xalign/parallel.hpp"
#include "xalign/rng.hpp"

namespace xalign {

const char* repr_name(ReprKind kind) {
  switch (kind) {
    case ReprKind::PostBoth: return "post_both";
    case ReprKind::PostSpectra: return "post_spectra";
    case ReprKind::PostText: return "post_text";
    case ReprKind::PreSpectra: return "pre_spectra";
    case ReprKind::PreText: return "pre_text";
  }
  return "?";
}

ReprKind parse_repr(const std::string& name) {
  for (ReprKind k : kMoePrecedence)
    if (name == repr_name(k)) return k;
  throw parameter_error("unknown representation '" + name + "'");
}

const DenseMatrix& RepresentationSet::get(ReprKind kind) const {
  switch (kind) {
    case ReprKind::PostBoth: return post_both;
    case ReprKind::PostSpectra: return post_spectra;
    case ReprKind::PostText: return post_text;
    case ReprKind::PreSpectra: return pre_spectra;
    case ReprKind::PreText: return pre_text;
  }
  return post_both;
}

RepresentationSet build_representations(const DatasetStore& store,
                                        const AlignmentModel& model) {
  RepresentationSet reps;
  reps.pre_spectra = store.spectral;
  reps.pre_text = store.text;
  reps.post_spectra = model.project_spectral_rows(store.spectral);
  reps.post_text = model.project_text_rows(store.text);
  reps.post_both = hconcat(reps.post_spectra, reps.post_text);
  return reps;
}

std::vector<double> knn_regress(const DenseMatrix& train_points,
                                std::span<const double> train_targets,
                                const DenseMatrix& queries, size_t k) {
  if (k == 0) throw parameter_error("knn_regress: k must be >= 1");
  if (train_points.rows != train_targets.size())
    throw shape_error("knn_regress: target count does not match training points");
  if (train_points.rows < k)
    throw insufficient_data_error("knn_regress: " + std::to_string(train_points.rows) +
                                  " training points for k=" + std::to_string(k));
  if (queries.cols != train_points.cols)
    throw shape_error("knn_regress: query dimension mismatch");

  std::vector<double> predictions(queries.rows, 0.0);
  parallel_for(0, queries.rows, [&](size_t q) {
    std::vector<std::pair<double, size_t>> dist(train_points.rows);
    for (size_t t = 0; t < train_points.rows; ++t)
      dist[t] = {kernels::dist2(queries.row(q), train_points.row(t), queries.cols), t};
    // (distance, index) order implements the tie rule
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    double acc = 0.0;
    std::sort(dist.begin(), dist.begin() + k);
    for (size_t i = 0; i < k; ++i) acc += train_targets[dist[i].second];
    predictions[q] = acc / static_cast<double>(k);
  });
  return predictions;
}

double mae(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size())
    throw shape_error("mae: length mismatch");
  if (predictions.empty())
    throw insufficient_data_error("mae: undefined over an empty sample");
  return kernels::abs_diff_sum(predictions.data(), truths.data(), predictions.size()) /
         static_cast<double>(predictions.size());
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw shape_error("pearson: length mismatch");
  if (x.size() < 2) throw parameter_error("pearson: need at least 2 paired values");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

std::vector<CorrelationEntry> correlation_table(const DenseMatrix& latents,
                                                const DatasetStore& store, size_t top_n) {
  if (latents.rows == 0 || latents.rows != store.size())
    throw parameter_error("correlation_table: latents do not join with the store rows");

  std::vector<CorrelationEntry> entries;
  for (size_t d = 0; d < latents.cols; ++d) {
    for (size_t v = 0; v < kPhysicalVariableCount; ++v) {
      std::vector<double> xs, ys;
      for (size_t r = 0; r < store.size(); ++r) {
        if (const auto val = store.physical_value(r, v)) {
          xs.push_back(latents.at(r, d));
          ys.push_back(*val);
        }
      }
      CorrelationEntry e;
      e.dim = d;
      e.variable = kPhysicalVariables[v];
      if (xs.size() < 2) {
        e.degenerate = true;
      } else {
        const auto p = pearson(xs, ys);
        e.abs_rho = std::fabs(p.rho);
        e.degenerate = p.degenerate;
      }
      entries.push_back(std::move(e));
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const CorrelationEntry& a, const CorrelationEntry& b) {
                     if (a.abs_rho != b.abs_rho) return a.abs_rho > b.abs_rho;
                     if (a.dim != b.dim) return a.dim < b.dim;
                     return a.variable < b.variable;
                   });
  if (entries.size() > top_n) entries.resize(top_n);
  return entries;
}

namespace {

struct VariableSplitData {
  std::vector<size_t> train_rows, val_rows, test_rows;
  std::vector<double> train_y, val_y, test_y;
};

VariableSplitData gather_variable(const DatasetStore& store, size_t variable) {
  VariableSplitData d;
  for (size_t r = 0; r < store.size(); ++r) {
    const auto v = store.physical_value(r, variable);
    if (!v) continue;
    switch (store.split[r]) {
      case Split::Train:
        d.train_rows.push_back(r);
        d.train_y.push_back(*v);
        break;
      case Split::Validation:
        d.val_rows.push_back(r);
        d.val_y.push_back(*v);
        break;
      case Split::Test:
        d.test_rows.push_back(r);
        d.test_y.push_back(*v);
        break;
      case Split::Calibration:
        break;  // calibration rows only tune the temperature
    }
  }
  return d;
}

DenseMatrix gather_rows(const DenseMatrix& m, const std::vector<size_t>& rows) {
  DenseMatrix out(rows.size(), m.cols);
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]), m.row(rows[i]) + m.cols, out.row(i));
  return out;
}

// Optional per-column z-scoring with training statistics.
void standardize_pair(DenseMatrix& train, DenseMatrix& queries) {
  for (size_t c = 0; c < train.cols; ++c) {
    double mean = 0;
    for (size_t r = 0; r < train.rows; ++r) mean += train.at(r, c);
    mean /= static_cast<double>(train.rows);
    double var = 0;
    for (size_t r = 0; r < train.rows; ++r) {
      const double d = train.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(train.rows);
    const double inv = var > 0 ? 1.0 / std::sqrt(var) : 0.0;
    for (size_t r = 0; r < train.rows; ++r) train.at(r, c) = (train.at(r, c) - mean) * inv;
    for (size_t r = 0; r < queries.rows; ++r)
      queries.at(r, c) = (queries.at(r, c) - mean) * inv;
  }
}

std::vector<double> predict_split(const RepresentationSet& reps, ReprKind kind,
                                  const VariableSplitData& data,
                                  const std::vector<size_t>& query_rows, size_t k,
                                  bool standardize) {
  DenseMatrix train = gather_rows(reps.get(kind), data.train_rows);
  DenseMatrix queries = gather_rows(reps.get(kind), query_rows);
  if (standardize) standardize_pair(train, queries);
  return knn_regress(train, data.train_y, queries, k);
}

}  // namespace

MoeChoice moe_select(const RepresentationSet& reps, const DatasetStore& store,
                     size_t variable, size_t k, MoeMetric metric, bool standardize) {
  const auto data = gather_variable(store, variable);
  MoeChoice choice;
  if (data.train_rows.size() < k || data.val_y.size() < 2) {
    choice.skipped = true;
    return choice;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (ReprKind kind : kMoePrecedence) {
    const auto pred = predict_split(reps, kind, data, data.val_rows, k, standardize);
    double score;
    if (metric == MoeMetric::Pearson) {
      score = pearson(pred, data.val_y).rho;  // degenerate -> 0
    } else {
      score = -mae(pred, data.val_y);
    }
    choice.validation_scores[static_cast<size_t>(kind)] = score;
    if (score > best) {  // strict: precedence order wins ties
      best = score;
      choice.kind = kind;
    }
  }
  return choice;
}

RegressionReport regression_report(const RepresentationSet& reps, const DatasetStore& store,
                                   const RegressionOptions& options) {
  if (store.split_rows(Split::Test).empty())
    throw insufficient_data_error("regression_report: empty test split");

  RegressionReport report;
  report.options = options;
  report.variables.resize(kPhysicalVariableCount);
  SeededRng master(options.seed);

  parallel_for(0, kPhysicalVariableCount, [&](size_t v) {
    VariableReport& row = report.variables[v];
    row.variable = kPhysicalVariables[v];
    const auto data = gather_variable(store, v);
    row.train_count = data.train_rows.size();
    row.validation_count = data.val_rows.size();
    row.test_count = data.test_rows.size();

    if (data.train_rows.size() < options.k) {
      row.skipped = true;
      row.skip_reason = "fewer than k usable training targets";
      return;
    }
    if (data.val_y.size() < 2) {
      row.skipped = true;
      row.skip_reason = "fewer than 2 usable validation targets";
      return;
    }
    if (data.test_y.empty()) {
      row.skipped = true;
      row.skip_reason = "no usable test targets";
      return;
    }

    // Mean baseline: predict the validation-set mean for every test sample.
    const double val_mean = kernels::sum(data.val_y.data(), data.val_y.size()) /
                            static_cast<double>(data.val_y.size());
    const std::vector<double> baseline(data.test_y.size(), val_mean);
    row.mean_baseline = mae(baseline, data.test_y);

    std::array<std::vector<double>, 5> test_preds;
    for (ReprKind kind : kMoePrecedence) {
      test_preds[static_cast<size_t>(kind)] =
          predict_split(reps, kind, data, data.test_rows, options.k, options.standardize);
      row.test_mae[static_cast<size_t>(kind)] =
          mae(test_preds[static_cast<size_t>(kind)], data.test_y);
    }

    const auto choice =
        moe_select(reps, store, v, options.k, options.moe_metric, options.standardize);
    row.moe_choice = choice.kind;
    row.moe_mae = *row.test_mae[static_cast<size_t>(choice.kind)];

    // Percentile bootstrap over test pairs for the MoE column.
    const auto& moe_pred = test_preds[static_cast<size_t>(choice.kind)];
    SeededRng boot_rng = master.derive(v);
    std::vector<double> stats(options.bootstrap_n);
    std::vector<double> sample_p(data.test_y.size()), sample_t(data.test_y.size());
    for (size_t b = 0; b < options.bootstrap_n; ++b) {
      for (size_t i = 0; i < data.test_y.size(); ++i) {
        const size_t pick = static_cast<size_t>(boot_rng.below(data.test_y.size()));
        sample_p[i] = moe_pred[pick];
        sample_t[i] = data.test_y[pick];
      }
      stats[b] = mae(sample_p, sample_t);
    }
    std::sort(stats.begin(), stats.end());
    const auto at_quantile = [&](double q) {
      const double pos = q * static_cast<double>(stats.size() - 1);
      return stats[static_cast<size_t>(std::llround(pos))];
    };
    row.uncertainty = 0.5 * (at_quantile(0.975) - at_quantile(0.025));

    const double best_pre = std::min(*row.test_mae[static_cast<size_t>(ReprKind::PreSpectra)],
                                     *row.test_mae[static_cast<size_t>(ReprKind::PreText)]);
    if (best_pre > 0)
      row.improvement_pct = 100.0 * (best_pre - row.moe_mae) / best_pre;
  });
  return report;
}

}  // namespace xalign
