#include "ger/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "ger/digest.hpp"
#include "ger/error.hpp"
#include "ger/kernels.hpp"
#include "ger/ngram.hpp"

namespace ger {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  fs::path p = it->get<std::string>();
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <class Fn>
auto config_field(const char* section, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config section '") + section + "': " + e.what());
  }
}

const std::set<std::string> kBuiltinSystems{"baseline", "oracle", "trigram"};

}  // namespace

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.source = j;
  config_field("top level", [&] {
    c.manifest = resolve(base_dir, j, "manifest");
    c.nbest = resolve(base_dir, j, "nbest");
    c.logits_dir = resolve(base_dir, j, "logits_dir");
    c.vocab = resolve(base_dir, j, "vocab");
    c.examples = resolve(base_dir, j, "examples");
    c.corrections_out = resolve(base_dir, j, "corrections_out");
    c.trigram_nbest = resolve(base_dir, j, "trigram_nbest");
    if (auto p = resolve(base_dir, j, "out_dir"); !p.empty()) c.out_dir = p;
    read(j, "word_delimiter", c.word_delimiter);
    read(j, "blank_index", c.blank_index);
    read(j, "nbest_max", c.nbest_max);
    read(j, "strict", c.strict);
    read(j, "seed", c.seed);
    read(j, "systems", c.systems);
    return 0;
  });

  if (auto it = j.find("norm"); it != j.end()) {
    config_field("norm", [&] {
      read(*it, "unicode_nfc", c.norm.unicode_nfc);
      read(*it, "lowercase", c.norm.lowercase);
      read(*it, "collapse_whitespace", c.norm.collapse_whitespace);
      read(*it, "strip_punct", c.norm.strip_punct);
      return 0;
    });
  }
  if (auto it = j.find("decode"); it != j.end()) {
    config_field("decode", [&] {
      read(*it, "beam_width", c.decode.beam_width);
      read(*it, "n_best", c.decode.n_best);
      read(*it, "lm_weight", c.decode.lm_weight);
      read(*it, "word_bonus", c.decode.word_bonus);
      read(*it, "prune_log_threshold", c.decode.prune_log_threshold);
      return 0;
    });
  }
  if (auto it = j.find("lm"); it != j.end() && !it->is_null()) {
    config_field("lm", [&] {
      LmSettings lm;
      lm.model = resolve(base_dir, *it, "model");
      lm.corpus = resolve(base_dir, *it, "corpus");
      read(*it, "alpha", lm.alpha);
      read(*it, "beta", lm.beta);
      read(*it, "min_count", lm.min_count);
      if (lm.model.empty() && lm.corpus.empty()) throw ConfigError("lm needs 'model' or 'corpus'");
      c.lm = lm;
      return 0;
    });
  }
  if (auto it = j.find("prompt"); it != j.end()) {
    config_field("prompt", [&] {
      if (auto m = it->find("mode"); m != it->end()) c.prompt.mode = parse_mode(m->get<std::string>());
      read(*it, "shots", c.prompt.shots);
      read(*it, "template", c.prompt.template_id);
      read(*it, "language", c.prompt.language_name);
      return 0;
    });
    find_template(c.prompt.template_id);
    if (c.prompt.shots < 0) throw ConfigError("prompt.shots must be >= 0");
  }
  if (auto it = j.find("backend"); it != j.end()) {
    config_field("backend", [&] {
      auto& b = c.backend;
      if (auto k = it->find("kind"); k != it->end()) b.kind = parse_backend_kind(k->get<std::string>());
      read(*it, "endpoint", b.endpoint);
      read(*it, "model", b.model_name);
      read(*it, "temperature", b.temperature);
      read(*it, "max_retries", b.max_retries);
      read(*it, "requests_per_minute", b.requests_per_minute);
      read(*it, "max_in_flight", b.max_in_flight);
      read(*it, "offline", b.offline);
      read(*it, "api_key_env", b.api_key_env);
      if (auto p = resolve(base_dir, *it, "cache_dir"); !p.empty()) b.cache_dir = p.string();
      if (auto ms = it->find("initial_backoff_ms"); ms != it->end())
        b.initial_backoff = std::chrono::milliseconds(ms->get<long>());
      return 0;
    });
    validate(c.backend);
  }
  if (auto it = j.find("corrections"); it != j.end()) {
    config_field("corrections", [&] {
      for (auto e = it->begin(); e != it->end(); ++e)
        c.corrections[e.key()] = resolve(base_dir, *it, e.key().c_str());
      return 0;
    });
  }
  if (c.systems.empty()) throw ConfigError("at least one system must be selected");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

// Output and cache locations do not change any metric, so they stay out of the digest.
std::string config_digest(const ExperimentConfig& cfg) {
  json j = cfg.source;
  if (j.is_object()) {
    j.erase("out_dir");
    if (auto b = j.find("backend"); b != j.end() && b->is_object()) b->erase("cache_dir");
  }
  return sha256_hex(j.dump());
}

namespace {

void require(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config is missing '") + what + "'");
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

// Tokenized training sentences: JSONL manifests contribute their references,
// anything else is read as one sentence per line.
std::vector<Tokens> read_corpus(const fs::path& corpus, const NormConfig& norm) {
  std::vector<Tokens> sentences;
  if (corpus.extension() == ".jsonl") {
    for (const auto& u : load_manifest(corpus, norm)) sentences.push_back(tokenize(u.reference, norm));
    return sentences;
  }
  std::ifstream in(corpus);
  if (!in) throw IoError("cannot open corpus " + corpus.string());
  std::string line;
  while (std::getline(in, line)) {
    Tokens t = tokenize(line, norm);
    if (!t.empty()) sentences.push_back(std::move(t));
  }
  return sentences;
}

TrigramLM obtain_lm(const LmSettings& s, const NormConfig& norm) {
  if (!s.model.empty() && fs::exists(s.model)) return TrigramLM::load(s.model);
  if (!s.corpus.empty()) {
    require(s.corpus, "lm.corpus");
    const auto sentences = read_corpus(s.corpus, norm);
    return TrigramLM::train(sentences, {s.min_count, s.corpus.filename().string()});
  }
  throw ConfigError("trigram model not found: " + s.model.string());
}

json lm_meta(const LmSettings& s) {
  return {{"alpha", s.alpha},
          {"beta", s.beta},
          {"min_count", s.min_count},
          {"model", s.model.filename().string()},
          {"corpus", s.corpus.filename().string()},
          {"smoothing", "interpolated-witten-bell"}};
}

json read_sidecar(const fs::path& file) {
  fs::path meta = file;
  meta += ".meta.json";
  if (!fs::exists(meta)) return nullptr;
  try {
    return json::parse(read_file(meta));
  } catch (const json::exception&) {
    return nullptr;
  }
}

void write_sidecar(const fs::path& file, const json& meta) {
  fs::path p = file;
  p += ".meta.json";
  write_file_atomic(p, meta.dump(2) + "\n");
}

// Lists in manifest order; throws if the id sets differ.
template <class Map>
auto in_manifest_order(const std::vector<Utterance>& utts, const Map& by_id, const fs::path& src) {
  std::vector<typename Map::mapped_type> out;
  std::vector<std::string> missing, extra;
  std::set<std::string> ids;
  for (const auto& u : utts) {
    ids.insert(u.id);
    auto it = by_id.find(u.id);
    if (it == by_id.end())
      missing.push_back(u.id);
    else
      out.push_back(it->second);
  }
  for (const auto& [id, _] : by_id)
    if (!ids.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? ", " : "") + v[i];
      if (v.size() > 20) s += ", ... (" + std::to_string(v.size()) + " total)";
      return s;
    };
    std::string msg = "utterance ids in " + src.string() + " do not match the manifest";
    if (!missing.empty()) msg += "; missing: " + list(missing);
    if (!extra.empty()) msg += "; not in manifest: " + list(extra);
    throw DataError(msg);
  }
  return out;
}

std::vector<NBestList> ordered_nbest(const ExperimentConfig& cfg, const fs::path& path,
                                     const std::vector<Utterance>& utts) {
  NBestLoadOptions opts;
  opts.max_n = cfg.nbest_max;
  opts.strict = cfg.strict;
  return in_manifest_order(utts, load_nbest(path, opts), path);
}

}  // namespace

fs::path cmd_decode(const ExperimentConfig& cfg) {
  validate(cfg.decode);
  require(cfg.vocab, "vocab");
  require(cfg.logits_dir, "logits_dir");
  const Vocab vocab = load_vocab(cfg.vocab, cfg.word_delimiter, cfg.blank_index);

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.logits_dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".ctcl" || ext == ".txt")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no logits files in " + cfg.logits_dir.string());

  std::vector<LogitMatrix> ms;
  ms.reserve(files.size());
  for (const auto& f : files) ms.push_back(load_logits(f));

  std::optional<TrigramLM> lm;
  if (cfg.decode.lm_weight > 0.0) {
    if (!cfg.lm) throw ConfigError("decode.lm_weight > 0 needs an 'lm' section");
    lm = obtain_lm(*cfg.lm, cfg.norm);
  }
  const auto lists = kernels::decode(ms, vocab, cfg.decode, lm ? &*lm : nullptr);

  fs::create_directories(cfg.out_dir);
  const fs::path out = cfg.out_dir / "nbest.jsonl";
  save_records(out, lists);
  json threshold = nullptr;
  if (std::isfinite(cfg.decode.prune_log_threshold)) threshold = cfg.decode.prune_log_threshold;
  write_sidecar(out, {{"beam_width", cfg.decode.beam_width},
                      {"n_best", cfg.decode.n_best},
                      {"lm_weight", cfg.decode.lm_weight},
                      {"word_bonus", cfg.decode.word_bonus},
                      {"prune_log_threshold", threshold},
                      {"lm_fusion", lm.has_value()},
                      {"lm", lm ? json(lm->trained_on()) : json(nullptr)},
                      {"utterances", lists.size()}});
  return out;
}

TrigramLM cmd_train_lm(const fs::path& corpus, const fs::path& out, const NormConfig& norm,
                       std::size_t min_count) {
  if (!fs::exists(corpus)) throw ConfigError("corpus not found: " + corpus.string());
  const auto sentences = read_corpus(corpus, norm);
  TrigramLM lm = TrigramLM::train(sentences, {min_count, corpus.filename().string()});
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  lm.save(out);
  return lm;
}

CorrectRun cmd_correct(const ExperimentConfig& cfg, const CorrectionOptions& opts) {
  require(cfg.manifest, "manifest");
  require(cfg.nbest, "nbest");
  const auto utts = load_manifest(cfg.manifest, cfg.norm);
  const auto lists = ordered_nbest(cfg, cfg.nbest, utts);

  std::vector<FewShotExample> examples;
  if (cfg.prompt.shots > 0) {
    require(cfg.examples, "examples");
    examples = load_examples(cfg.examples);
    if (examples.size() < static_cast<std::size_t>(cfg.prompt.shots))
      throw ConfigError(std::to_string(cfg.prompt.shots) + "-shot prompting needs " +
                        std::to_string(cfg.prompt.shots) + " examples, " +
                        cfg.examples.string() + " has " + std::to_string(examples.size()));
  }

  std::map<std::string, std::string> refs;
  for (const auto& u : utts) refs.emplace(u.id, u.reference);

  CorrectRun run;
  CorrectionOptions o = opts;
  if (!o.references) o.references = &refs;
  o.stats = &run.stats;
  run.records = correct_batch(lists, cfg.prompt, cfg.backend, examples, o);
  if (opts.stats) *opts.stats = run.stats;

  run.output = cfg.corrections_out;
  if (run.output.empty())
    run.output = cfg.out_dir / ("corrections." + to_string(cfg.prompt.mode) + ".k" +
                                std::to_string(cfg.prompt.shots) + ".jsonl");
  if (run.output.has_parent_path()) fs::create_directories(run.output.parent_path());
  save_records(run.output, run.records);
  write_sidecar(run.output, {{"mode", to_string(cfg.prompt.mode)},
                             {"shots", cfg.prompt.shots},
                             {"template", cfg.prompt.template_id},
                             {"language", cfg.prompt.language_name},
                             {"backend", to_string(cfg.backend.kind)},
                             {"model", cfg.backend.model_name},
                             {"temperature", cfg.backend.temperature}});
  return run;
}

Report cmd_evaluate(const ExperimentConfig& cfg) {
  require(cfg.manifest, "manifest");
  require(cfg.nbest, "nbest");
  const auto utts = load_manifest(cfg.manifest, cfg.norm);
  if (utts.empty()) throw DataError("manifest is empty");
  const auto lists = ordered_nbest(cfg, cfg.nbest, utts);

  // Empty-reference utterances have no defined WER; they are left out of every
  // metric and counted in the metadata.
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < utts.size(); ++i)
    if (!utts[i].empty_reference) keep.push_back(i);
  if (keep.empty()) throw DataError("every reference is empty");

  std::vector<Tokens> refs, baseline;
  std::vector<NBestList> kept_lists;
  for (auto i : keep) {
    refs.push_back(tokenize(utts[i].reference, cfg.norm));
    baseline.push_back(tokenize(lists[i].top().text, cfg.norm));
    kept_lists.push_back(lists[i]);
  }

  auto texts_of = [&](auto&& text_at) {
    std::vector<Tokens> out;
    for (auto i : keep) out.push_back(tokenize(text_at(i), cfg.norm));
    return out;
  };

  json systems_meta = json::object();
  std::optional<std::string> template_version;
  Report report;
  for (const auto& name : cfg.systems) {
    std::vector<Tokens> hyps;
    if (name == "baseline") {
      hyps = baseline;
    } else if (name == "oracle") {
      const auto picks = kernels::oracle(refs, kept_lists, cfg.norm);
      for (std::size_t k = 0; k < picks.size(); ++k)
        hyps.push_back(tokenize(
            kept_lists[k].hypotheses[static_cast<std::size_t>(picks[k].index - 1)].text, cfg.norm));
    } else if (name == "trigram") {
      if (!cfg.trigram_nbest.empty()) {
        require(cfg.trigram_nbest, "trigram_nbest");
        const auto fused = ordered_nbest(cfg, cfg.trigram_nbest, utts);
        hyps = texts_of([&](std::size_t i) { return fused[i].top().text; });
        systems_meta[name] = {{"source", "fused decoding"},
                              {"decode", read_sidecar(cfg.trigram_nbest)}};
      } else {
        if (!cfg.lm) throw ConfigError("system 'trigram' needs an 'lm' section or 'trigram_nbest'");
        const TrigramLM lm = obtain_lm(*cfg.lm, cfg.norm);
        hyps = texts_of([&](std::size_t i) {
          return rescore_nbest(lm, lists[i], cfg.lm->alpha, cfg.lm->beta, cfg.norm).top().text;
        });
        systems_meta[name] = {{"source", "N-best rescoring"}, {"lm", lm_meta(*cfg.lm)}};
      }
    } else {
      auto it = cfg.corrections.find(name);
      if (it == cfg.corrections.end())
        throw ConfigError("system '" + name + "' has no entry under 'corrections'");
      require(it->second, ("corrections." + name).c_str());
      std::map<std::string, CorrectionRecord> by_id;
      for (auto& r : load_corrections(it->second)) {
        const std::string id = r.utt_id;
        if (!by_id.emplace(id, std::move(r)).second)
          throw DataError(it->second.string() + ": duplicate utt_id '" + id + "'");
      }
      const auto records = in_manifest_order(utts, by_id, it->second);
      hyps = texts_of([&](std::size_t i) { return records[i].corrected_text; });
      json meta = read_sidecar(it->second);
      std::size_t fallbacks = 0, failures = 0;
      for (const auto& r : records) {
        fallbacks += r.parse_status == ParseStatus::fallback;
        failures += r.failed();
      }
      if (meta.is_null()) meta = json::object();
      meta["fallbacks"] = fallbacks;
      meta["failures"] = failures;
      if (meta.contains("template") && !template_version)
        template_version = meta["template"].get<std::string>();
      systems_meta[name] = meta;
    }

    const auto evals = kernels::compare(refs, baseline, hyps);
    std::vector<EditCounts> counts;
    std::vector<SentenceCategory> cats;
    std::vector<EditAnalysis> edits;
    for (std::size_t k = 0; k < evals.size(); ++k) {
      counts.push_back(evals[k].corr);
      cats.push_back(evals[k].category);
      cats.back().utt_id = utts[keep[k]].id;
      edits.push_back(evals[k].edits);
    }
    CorpusWer wer = corpus_wer(counts);
    wer.utterances = utts.size();
    wer.empty_references = utts.size() - keep.size();
    report.systems.push_back(aggregate(name, cats, edits, wer));
  }

  report.metadata = {
      {"config_digest", config_digest(cfg)},
      {"seed", cfg.seed},
      {"normalization",
       {{"unicode_nfc", cfg.norm.unicode_nfc},
        {"lowercase", cfg.norm.lowercase},
        {"collapse_whitespace", cfg.norm.collapse_whitespace},
        {"strip_punct", cfg.norm.strip_punct},
        {"summary", describe(cfg.norm)}}},
      {"template_version", template_version ? json(*template_version) : json(nullptr)},
      {"utterances", utts.size()},
      {"empty_references", utts.size() - keep.size()},
      {"nbest_decode", read_sidecar(cfg.nbest)},
      {"systems", systems_meta},
  };
  write_report(report, cfg.out_dir);
  return report;
}

void cmd_report(const fs::path& report_json, const fs::path& out_dir) {
  json j;
  try {
    j = json::parse(read_file(report_json));
  } catch (const json::exception& e) {
    throw FormatError(report_json.string() + ": " + e.what());
  }
  write_report(report_from_json(j), out_dir);
}

}  // namespace ger
