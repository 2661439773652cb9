#include "xalign/reports.hpp"

#include <cmath>
#include <fstream>

#include "xalign/csv.hpp"
#include "xalign/errors.hpp"

namespace xalign {

namespace {

using ordered_json = nlohmann::ordered_json;

// "1" for integral cutoffs, "2.5" otherwise; keys stay stable across runs.
std::string k_key(double k) {
  if (k == std::floor(k)) return std::to_string(static_cast<long long>(k));
  std::string s = format_double(k);
  return s;
}

}  // namespace

ordered_json retrieval_report_json(const RetrievalReport& report) {
  ordered_json j;
  j["candidate_count"] = report.candidate_count;
  j["query_count"] = report.ranks.size();
  j["ranks"] = report.ranks;
  ordered_json recall;
  for (const auto& [k, r] : report.recall_at) recall[k_key(k)] = r;
  j["recall_at"] = std::move(recall);
  j["median_rank"] = report.median;
  return j;
}

ordered_json regression_report_json(const RegressionReport& report) {
  ordered_json j;
  j["k"] = report.options.k;
  j["moe_metric"] = report.options.moe_metric == MoeMetric::Pearson ? "pearson" : "mae";
  j["standardize"] = report.options.standardize;
  j["bootstrap_n"] = report.options.bootstrap_n;
  j["seed"] = report.options.seed;
  ordered_json rows = ordered_json::array();
  for (const auto& v : report.variables) {
    ordered_json row;
    row["variable"] = v.variable;
    if (v.skipped) {
      row["skipped"] = true;
      row["skip_reason"] = v.skip_reason;
      row["train_count"] = v.train_count;
      row["validation_count"] = v.validation_count;
      row["test_count"] = v.test_count;
      rows.push_back(std::move(row));
      continue;
    }
    row["mean_baseline"] = v.mean_baseline;
    row["pre_spectra"] = *v.test_mae[static_cast<size_t>(ReprKind::PreSpectra)];
    row["pre_text"] = *v.test_mae[static_cast<size_t>(ReprKind::PreText)];
    row["post_spectra"] = *v.test_mae[static_cast<size_t>(ReprKind::PostSpectra)];
    row["post_text"] = *v.test_mae[static_cast<size_t>(ReprKind::PostText)];
    row["post_both"] = *v.test_mae[static_cast<size_t>(ReprKind::PostBoth)];
    row["moe_choice"] = repr_name(v.moe_choice);
    row["moe_mae"] = v.moe_mae;
    row["uncertainty"] = v.uncertainty;
    if (v.improvement_pct)
      row["improvement_pct"] = *v.improvement_pct;
    else
      row["improvement_pct"] = nullptr;
    row["train_count"] = v.train_count;
    row["validation_count"] = v.validation_count;
    row["test_count"] = v.test_count;
    rows.push_back(std::move(row));
  }
  j["variables"] = std::move(rows);
  return j;
}

ordered_json anomaly_report_json(const AnomalyReport& report) {
  ordered_json j;
  j["params"] = {{"tree_count", report.params.tree_count},
                 {"subsample", report.params.subsample},
                 {"seed", report.params.seed},
                 {"representation", report.representation},
                 {"quantile", report.quantile}};
  ordered_json scores = ordered_json::array();
  for (size_t i = 0; i < report.ids.size(); ++i)
    scores.push_back({{"source_id", report.ids[i]}, {"score", report.scores[i]}});
  j["scores"] = std::move(scores);
  ordered_json flagged = ordered_json::array();
  for (size_t idx : report.flagged) flagged.push_back(report.ids[idx]);
  j["flagged"] = std::move(flagged);
  ordered_json classes;
  for (const auto& c : report.class_summary)
    classes[c.class_name] = {
        {"median", c.median}, {"variance", c.variance}, {"count", c.count}};
  j["class_summary"] = std::move(classes);
  return j;
}

ordered_json train_log_json(const TrainLog& log) {
  ordered_json j;
  j["epochs"] = log.train_loss.size();
  j["train_loss"] = log.train_loss;
  j["validation_top1"] = log.val_top1;
  j["best_epoch"] = log.best_epoch;
  return j;
}

ordered_json correlation_table_json(const std::vector<CorrelationEntry>& table) {
  ordered_json rows = ordered_json::array();
  for (const auto& e : table) {
    ordered_json row;
    row["latent_dim"] = e.dim;
    row["variable"] = e.variable;
    row["abs_pearson"] = e.abs_rho;
    row["degenerate"] = e.degenerate;
    rows.push_back(std::move(row));
  }
  ordered_json j;
  j["entries"] = std::move(rows);
  return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write failure in " + path.string());
}

void write_recall_curve_csv(const std::filesystem::path& path,
                            const RetrievalReport& report) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "k_percent,recall\n";
  for (const auto& [k, r] : report.recall_at)
    out << format_double(k) << ',' << format_double(r) << '\n';
  if (!out) throw io_error("write failure in " + path.string());
}

void write_regression_csv(const std::filesystem::path& path,
                          const RegressionReport& report) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "variable,mean_baseline,pre_spectra,pre_text,post_spectra,post_text,post_both,"
         "moe_choice,moe_mae,uncertainty,improvement_pct\n";
  for (const auto& v : report.variables) {
    out << v.variable;
    if (v.skipped) {
      out << ",,,,,,,skipped,,,\n";
      continue;
    }
    out << ',' << format_double(v.mean_baseline);
    for (ReprKind kind : {ReprKind::PreSpectra, ReprKind::PreText, ReprKind::PostSpectra,
                          ReprKind::PostText, ReprKind::PostBoth})
      out << ',' << format_double(*v.test_mae[static_cast<size_t>(kind)]);
    out << ',' << repr_name(v.moe_choice);
    out << ',' << format_double(v.moe_mae);
    out << ',' << format_double(v.uncertainty);
    out << ',';
    if (v.improvement_pct) out << format_double(*v.improvement_pct);
    out << '\n';
  }
  if (!out) throw io_error("write failure in " + path.string());
}

void write_anomaly_csv(const std::filesystem::path& path, const AnomalyReport& report) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  std::vector<bool> is_flagged(report.ids.size(), false);
  for (size_t idx : report.flagged) is_flagged[idx] = true;
  out << "source_id,score,flagged\n";
  for (size_t i = 0; i < report.ids.size(); ++i)
    out << report.ids[i] << ',' << format_double(report.scores[i]) << ','
        << (is_flagged[i] ? 1 : 0) << '\n';
  if (!out) throw io_error("write failure in " + path.string());
}

void write_correlation_csv(const std::filesystem::path& path,
                           const std::vector<CorrelationEntry>& table) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "latent_dim,variable,abs_pearson,degenerate\n";
  for (const auto& e : table)
    out << e.dim << ',' << e.variable << ',' << format_double(e.abs_rho) << ','
        << (e.degenerate ? 1 : 0) << '\n';
  if (!out) throw io_error("write failure in " + path.string());
}

}  // namespace xalign
