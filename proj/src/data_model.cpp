#include "ger/data_model.hpp"

#include <algorithm>
#include <atomic>
#include <unistd.h>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <system_error>

#include "ger/error.hpp"
#include "ger/prompt.hpp"

namespace ger {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::string to_string(CorrectionMode m) {
  return m == CorrectionMode::generation ? "generation" : "selection";
}

std::string to_string(ParseStatus s) { return s == ParseStatus::ok ? "ok" : "fallback"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation" || s == "dev") return Split::validation;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

CorrectionMode parse_mode(const std::string& s) {
  if (s == "generation") return CorrectionMode::generation;
  if (s == "selection") return CorrectionMode::selection;
  throw ConfigError("unknown correction mode '" + s + "'");
}

ParseStatus parse_status(const std::string& s) {
  if (s == "ok") return ParseStatus::ok;
  if (s == "fallback") return ParseStatus::fallback;
  throw DataError("unknown parse_status '" + s + "'");
}

void to_json(json& j, const Utterance& u) {
  j = json{{"id", u.id}, {"reference", u.reference}};
  if (u.split) j["split"] = to_string(*u.split);
  if (u.duration_s) j["duration_s"] = *u.duration_s;
}

void from_json(const json& j, Utterance& u) {
  u = Utterance{};
  u.id = j.at("id").get<std::string>();
  u.reference = j.at("reference").get<std::string>();
  if (auto it = j.find("split"); it != j.end() && !it->is_null())
    u.split = parse_split(it->get<std::string>());
  if (auto it = j.find("duration_s"); it != j.end() && !it->is_null()) {
    double d = it->get<double>();
    if (!(d >= 0.0) || !std::isfinite(d)) throw DataError("duration_s must be a non-negative number");
    u.duration_s = d;
  }
}

void to_json(json& j, const NBestList& n) {
  json hyps = json::array();
  for (const auto& h : n.hypotheses) hyps.push_back({{"text", h.text}, {"score", h.score}});
  j = json{{"utt_id", n.utt_id}, {"hypotheses", std::move(hyps)}};
}

void from_json(const json& j, NBestList& n) {
  n = NBestList{};
  n.utt_id = j.at("utt_id").get<std::string>();
  int rank = 1;
  for (const auto& h : j.at("hypotheses")) {
    Hypothesis hyp;
    if (h.is_string()) {
      hyp.text = h.get<std::string>();
    } else {
      hyp.text = h.at("text").get<std::string>();
      if (auto it = h.find("score"); it != h.end() && !it->is_null()) hyp.score = it->get<double>();
    }
    if (!std::isfinite(hyp.score)) throw DataError("non-finite hypothesis score");
    hyp.rank = rank++;
    n.hypotheses.push_back(std::move(hyp));
  }
}

void to_json(json& j, const CorrectionRecord& r) {
  j = json{{"utt_id", r.utt_id},
           {"mode", to_string(r.mode)},
           {"shots", r.shots},
           {"prompt_hash", r.prompt_hash},
           {"raw_response", r.raw_response},
           {"corrected_text", r.corrected_text},
           {"parse_status", to_string(r.parse_status)}};
  if (r.selected_index) j["selected_index"] = *r.selected_index;
  if (r.error) j["error"] = *r.error;
}

void from_json(const json& j, CorrectionRecord& r) {
  r = CorrectionRecord{};
  r.utt_id = j.at("utt_id").get<std::string>();
  r.mode = parse_mode(j.at("mode").get<std::string>());
  r.shots = j.at("shots").get<int>();
  r.prompt_hash = j.at("prompt_hash").get<std::string>();
  r.raw_response = j.at("raw_response").get<std::string>();
  r.corrected_text = j.at("corrected_text").get<std::string>();
  r.parse_status = parse_status(j.at("parse_status").get<std::string>());
  if (auto it = j.find("selected_index"); it != j.end() && !it->is_null())
    r.selected_index = it->get<int>();
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) r.error = it->get<std::string>();
}

namespace {

bool blank_line(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

// Calls fn(json, line_number) for every non-blank line.
template <class Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank_line(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " +
                        e.what());
    }
    try {
      fn(j, lineno);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.rfind(path.string() + ":", 0) == 0) throw;
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
    }
  }
}

}  // namespace

std::vector<Utterance> load_manifest(const std::filesystem::path& path, const NormConfig& norm) {
  std::vector<Utterance> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const json& j, std::size_t lineno) {
    Utterance u = j.get<Utterance>();
    if (u.id.empty()) throw DataError("empty utterance id");
    if (!seen.insert(u.id).second)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate id '" + u.id +
                      "'");
    u.empty_reference = tokenize(u.reference, norm).empty();
    out.push_back(std::move(u));
  });
  return out;
}

void canonicalize(NBestList& list) {
  std::stable_sort(list.hypotheses.begin(), list.hypotheses.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < list.hypotheses.size(); ++i)
    list.hypotheses[i].rank = static_cast<int>(i) + 1;
}

std::map<std::string, NBestList> load_nbest(const std::filesystem::path& path,
                                            const NBestLoadOptions& opts) {
  std::map<std::string, NBestList> out;
  for_each_jsonl(path, [&](const json& j, std::size_t lineno) {
    NBestList list = j.get<NBestList>();
    if (list.hypotheses.empty()) throw DataError("utterance '" + list.utt_id + "' has no hypotheses");
    canonicalize(list);
    if (list.hypotheses.size() > opts.max_n) {
      std::string msg = path.string() + ":" + std::to_string(lineno) + ": '" + list.utt_id +
                        "' has " + std::to_string(list.hypotheses.size()) +
                        " hypotheses, limit is " + std::to_string(opts.max_n);
      if (opts.strict) throw DataError(msg);
      if (opts.on_warning)
        opts.on_warning(msg + "; truncated");
      else
        std::cerr << "warning: " << msg << "; truncated\n";
      list.hypotheses.resize(opts.max_n);
    }
    std::string id = list.utt_id;
    if (!out.emplace(id, std::move(list)).second)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate utt_id '" + id +
                      "'");
  });
  return out;
}

template <class Record>
std::vector<Record> load_records(const std::filesystem::path& path) {
  std::vector<Record> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(j.get<Record>()); });
  return out;
}

std::vector<CorrectionRecord> load_corrections(const std::filesystem::path& path) {
  return load_records<CorrectionRecord>(path);
}

template <class Record>
std::size_t save_records(const std::filesystem::path& path, std::span<const Record> records) {
  std::string body;
  for (const auto& r : records) {
    body += json(r).dump();
    body += '\n';
  }
  write_file_atomic(path, body);
  return records.size();
}

template std::vector<Utterance> load_records<Utterance>(const std::filesystem::path&);
template std::vector<NBestList> load_records<NBestList>(const std::filesystem::path&);
template std::vector<CorrectionRecord> load_records<CorrectionRecord>(const std::filesystem::path&);
template std::vector<FewShotExample> load_records<FewShotExample>(const std::filesystem::path&);
template std::size_t save_records<Utterance>(const std::filesystem::path&, std::span<const Utterance>);
template std::size_t save_records<NBestList>(const std::filesystem::path&, std::span<const NBestList>);
template std::size_t save_records<CorrectionRecord>(const std::filesystem::path&,
                                                    std::span<const CorrectionRecord>);
template std::size_t save_records<FewShotExample>(const std::filesystem::path&,
                                                  std::span<const FewShotExample>);

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  static std::atomic<unsigned long> counter{0};
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ger
