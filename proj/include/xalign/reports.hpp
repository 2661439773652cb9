#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "xalign/align.hpp"
#include "xalign/anomaly.hpp"
#include "xalign/regress.hpp"
#include "xalign/retrieval.hpp"

namespace xalign {

// Every report serializes to JSON with a CSV mirror. Serialization is
// byte-deterministic for identical inputs: ordered keys, shortest
// round-trip doubles, no timestamps.

nlohmann::ordered_json retrieval_report_json(const RetrievalReport& report);
nlohmann::ordered_json regression_report_json(const RegressionReport& report);
nlohmann::ordered_json anomaly_report_json(const AnomalyReport& report);
nlohmann::ordered_json train_log_json(const TrainLog& log);
nlohmann::ordered_json correlation_table_json(const std::vector<CorrelationEntry>& table);

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

// CSV mirrors: recall curve `k_percent,recall`; regression rows mirror the
// JSON columns; anomaly scores `source_id,score,flagged`.
void write_recall_curve_csv(const std::filesystem::path& path, const RetrievalReport& report);
void write_regression_csv(const std::filesystem::path& path, const RegressionReport& report);
void write_anomaly_csv(const std::filesystem::path& path, const AnomalyReport& report);
void write_correlation_csv(const std::filesystem::path& path,
                           const std::vector<CorrelationEntry>& table);

}  // namespace xalign
