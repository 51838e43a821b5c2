#pragma once

#include <string>

#include <json.hpp>

#include "pq/analysis.hpp"
#include "pq/search.hpp"
#include "pq/tune.hpp"

namespace pq {

inline constexpr int kReportSchemaVersion = 1;

// All report JSON carries schema_version; wall-clock data lives under a
// "timing" key so reproducibility comparisons can strip it uniformly.
nlohmann::json trace_to_json(const SearchTrace& trace);
nlohmann::json tune_log_to_json(const TuneResult& result, const TuneConfig& cfg);
nlohmann::json outlier_to_json(const OutlierReport& report);
nlohmann::json sink_to_json(const SinkReport& report);
nlohmann::json ablation_to_json(const AblationTable& table);
nlohmann::json cost_to_json(const CostReport& report);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

std::string outlier_to_csv(const OutlierReport& report);
std::string sink_to_csv(const SinkReport& report);
std::string ablation_to_csv(const AblationTable& table);

// Per-layer magnitude profile (log-scale line chart).
std::string outlier_to_svg(const OutlierReport& report);
// Mean-over-heads attention heatmap per layer; prefix columns outlined.
std::string attention_heatmap_svg(const TapRecord& taps);

}  // namespace pq
