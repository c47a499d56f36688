#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ger/backend.hpp"
#include "ger/correction.hpp"
#include "ger/ctc.hpp"
#include "ger/report.hpp"

namespace ger {

inline constexpr double kDefaultTrigramAlpha = 0.5;
inline constexpr double kDefaultTrigramBeta = 1.0;

struct LmSettings {
  std::filesystem::path model;   // trained model file
  std::filesystem::path corpus;  // training text (plain lines or JSONL manifest)
  double alpha = kDefaultTrigramAlpha;
  double beta = kDefaultTrigramBeta;
  std::size_t min_count = 1;
};

// Experiment configuration, read from a JSON file. Relative paths resolve
// against the directory holding the file.
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path nbest;
  std::filesystem::path logits_dir;
  std::filesystem::path vocab;
  std::string word_delimiter = "|";
  std::size_t blank_index = 0;
  std::size_t nbest_max = 5;
  bool strict = false;

  NormConfig norm;
  DecodeConfig decode;
  std::optional<LmSettings> lm;
  PromptConfig prompt;
  std::filesystem::path examples;
  std::filesystem::path corrections_out;
  BackendConfig backend;

  std::vector<std::string> systems{"baseline", "oracle"};
  std::map<std::string, std::filesystem::path> corrections;  // LLM system name -> records
  std::filesystem::path trigram_nbest;  // N-best from fused decoding, if any

  std::filesystem::path out_dir = "out";
  std::int64_t seed = 0;

  nlohmann::json source;  // the JSON the config was read from, after overrides
};

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// SHA-256 of the canonical (sorted-key) dump of the config JSON, leaving out
// out_dir and backend.cache_dir.
std::string config_digest(const ExperimentConfig& cfg);

// Decodes every *.ctcl / *.txt file in logits_dir (sorted by name) and writes
// out_dir/nbest.jsonl plus nbest.jsonl.meta.json. Returns the N-best path.
std::filesystem::path cmd_decode(const ExperimentConfig& cfg);

// Trains on a plain-text corpus (one sentence per line) or a JSONL manifest
// (its references) and writes the model file.
TrigramLM cmd_train_lm(const std::filesystem::path& corpus, const std::filesystem::path& out,
                       const NormConfig& norm = {}, std::size_t min_count = 1);

struct CorrectRun {
  std::filesystem::path output;
  std::vector<CorrectionRecord> records;
  CorrectionStats stats;
};

CorrectRun cmd_correct(const ExperimentConfig& cfg, const CorrectionOptions& opts = {});

Report cmd_evaluate(const ExperimentConfig& cfg);

// Re-renders Markdown and CSV from an existing report.json.
void cmd_report(const std::filesystem::path& report_json, const std::filesystem::path& out_dir);

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitBackend = 4,
};

}  // namespace ger
