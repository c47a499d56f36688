#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ger/analysis.hpp"

namespace ger {

// Everything `evaluate` emits. Percentages are stored alongside the raw counts
// they derive from.
struct Report {
  nlohmann::json metadata;
  std::vector<ExperimentSummary> systems;  // first entry is the baseline
};

nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

std::string render_markdown(const Report& r);
std::string render_wer_csv(const Report& r);
std::string render_sentence_csv(const Report& r);
std::string render_edit_csv(const Report& r);

// Writes report.json, report.md, wer.csv, sentences.csv and edits.csv.
void write_report(const Report& r, const std::filesystem::path& out_dir);

// Fixed one-decimal rendering; empty optional renders as "-".
std::string format_pct(std::optional<double> v);

}  // namespace ger
