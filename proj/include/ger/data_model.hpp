#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ger/text.hpp"

namespace ger {

enum class Split { train, validation, test };

struct Utterance {
  std::string id;
  std::string reference;
  std::optional<Split> split;
  std::optional<double> duration_s;
  // Set by load_manifest when the normalized reference has no tokens.
  bool empty_reference = false;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Hypothesis {
  std::string text;
  double score = 0.0;  // decoder log-probability, higher is better
  int rank = 1;        // 1-based

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct NBestList {
  std::string utt_id;
  std::vector<Hypothesis> hypotheses;

  const Hypothesis& top() const { return hypotheses.front(); }
  std::size_t size() const { return hypotheses.size(); }

  friend bool operator==(const NBestList&, const NBestList&) = default;
};

enum class CorrectionMode { generation, selection };
enum class ParseStatus { ok, fallback };

struct CorrectionRecord {
  std::string utt_id;
  CorrectionMode mode = CorrectionMode::generation;
  int shots = 0;
  std::string prompt_hash;
  std::string raw_response;
  std::string corrected_text;
  std::optional<int> selected_index;  // selection mode only, 1-based
  ParseStatus parse_status = ParseStatus::ok;
  std::optional<std::string> error;   // set when the backend gave up

  bool failed() const { return error.has_value(); }

  friend bool operator==(const CorrectionRecord&, const CorrectionRecord&) = default;
};

std::string to_string(Split s);
std::string to_string(CorrectionMode m);
std::string to_string(ParseStatus s);
Split parse_split(const std::string& s);
CorrectionMode parse_mode(const std::string& s);
ParseStatus parse_status(const std::string& s);

void to_json(nlohmann::json& j, const Utterance& u);
void from_json(const nlohmann::json& j, Utterance& u);
void to_json(nlohmann::json& j, const NBestList& n);
void from_json(const nlohmann::json& j, NBestList& n);
void to_json(nlohmann::json& j, const CorrectionRecord& r);
void from_json(const nlohmann::json& j, CorrectionRecord& r);

// Reads a JSONL manifest. Rejects malformed lines and duplicate ids, naming the
// offending line number. Blank lines are skipped.
std::vector<Utterance> load_manifest(const std::filesystem::path& path,
                                     const NormConfig& norm = {});

struct NBestLoadOptions {
  std::size_t max_n = 5;
  bool strict = false;  // error instead of truncating lists longer than max_n
  std::function<void(const std::string&)> on_warning;  // defaults to stderr
};

// Reads a JSONL N-best file. Hypotheses are re-sorted by score (stable) and
// re-ranked 1..N; missing scores default to 0.0 so the file order is kept.
std::map<std::string, NBestList> load_nbest(const std::filesystem::path& path,
                                            const NBestLoadOptions& opts = {});

// Brings a list into canonical form: stable sort by score descending, ranks 1..N.
void canonicalize(NBestList& list);

std::vector<CorrectionRecord> load_corrections(const std::filesystem::path& path);

template <class Record>
std::vector<Record> load_records(const std::filesystem::path& path);

// Writes one JSON object per line. Returns the number of records written.
template <class Record>
std::size_t save_records(const std::filesystem::path& path, std::span<const Record> records);

template <class Record>
std::size_t save_records(const std::filesystem::path& path, const std::vector<Record>& records) {
  return save_records(path, std::span<const Record>(records));
}

// Atomically replaces `path` with `contents` (write to a sibling temp file, then rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace ger
