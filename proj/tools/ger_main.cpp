// ger: decode, correct and score ASR N-best lists.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ger/error.hpp"
#include "ger/ngram.hpp"
#include "ger/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::int64_t> seed;
  std::optional<std::string> out_dir;

  // decode
  std::optional<std::string> logits_dir, vocab;
  std::optional<std::size_t> beam_width, n_best;
  std::optional<double> lm_weight, word_bonus;
  // correct
  std::optional<std::string> backend, mode, output;
  std::optional<int> shots;
};

void apply(json& j, const Overrides& o) {
  if (o.seed) j["seed"] = *o.seed;
  if (o.logits_dir) j["logits_dir"] = *o.logits_dir;
  if (o.vocab) j["vocab"] = *o.vocab;
  if (o.beam_width) j["decode"]["beam_width"] = *o.beam_width;
  if (o.n_best) j["decode"]["n_best"] = *o.n_best;
  if (o.lm_weight) j["decode"]["lm_weight"] = *o.lm_weight;
  if (o.word_bonus) j["decode"]["word_bonus"] = *o.word_bonus;
  if (o.backend) j["backend"]["kind"] = *o.backend;
  if (o.mode) j["prompt"]["mode"] = *o.mode;
  if (o.shots) j["prompt"]["shots"] = *o.shots;
}

// The output directory is kept out of the digest: it names where results go,
// not what they are.
ger::ExperimentConfig make_config(const std::string& config_path, const Overrides& o) {
  json j = json::object();
  fs::path base = fs::current_path();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ger::ConfigError("cannot open config " + config_path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ger::ConfigError(config_path + ": " + e.what());
    }
    base = fs::path(config_path).parent_path();
  }
  apply(j, o);
  auto cfg = ger::config_from_json(j, base);
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.output) cfg.corrections_out = *o.output;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative error correction toolkit for ASR N-best lists"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  app.add_option("--config", config_path, "Experiment configuration (JSON)");
  app.add_option("--seed", o.seed, "Seed recorded in the report metadata");
  app.add_option("--out-dir", o.out_dir, "Output directory");

  auto* decode = app.add_subcommand("decode", "CTC prefix beam search over a directory of logits");
  decode->add_option("--logits-dir", o.logits_dir);
  decode->add_option("--vocab", o.vocab);
  decode->add_option("--beam-width", o.beam_width);
  decode->add_option("--n-best", o.n_best);
  decode->add_option("--lm-weight", o.lm_weight);
  decode->add_option("--word-bonus", o.word_bonus);

  auto* train = app.add_subcommand("train-lm", "Train the trigram baseline model");
  std::string corpus, model_out;
  std::size_t min_count = 1;
  train->add_option("--corpus", corpus, "Text (one sentence per line) or JSONL manifest")->required();
  train->add_option("--out", model_out, "Model file to write")->required();
  train->add_option("--min-count", min_count, "Words seen fewer times map to <unk>");

  auto* correct = app.add_subcommand("correct", "Run LLM correction over an N-best file");
  correct->add_option("--backend", o.backend, "http_chat | mock_echo | mock_oracle | identity");
  correct->add_option("--mode", o.mode, "generation | selection");
  correct->add_option("--shots", o.shots, "Number of few-shot examples");
  correct->add_option("--output", o.output, "Corrections file to write");

  auto* evaluate = app.add_subcommand("evaluate", "Score systems and write reports");

  auto* report = app.add_subcommand("report", "Re-render Markdown/CSV from report.json");
  std::string report_json;
  report->add_option("--report", report_json, "report.json (default: <out-dir>/report.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*decode) {
      auto cfg = make_config(config_path, o);
      std::cout << ger::cmd_decode(cfg).string() << '\n';
    } else if (*train) {
      auto cfg = make_config(config_path, o);
      auto lm = ger::cmd_train_lm(corpus, model_out, cfg.norm, min_count);
      std::cout << model_out << ": " << lm.words().size() - 3 << " words\n";
    } else if (*correct) {
      auto cfg = make_config(config_path, o);
      auto run = ger::cmd_correct(cfg);
      std::cout << run.output.string() << ": " << run.records.size() << " records, "
                << run.stats.cache_hits << " cached, " << run.stats.failed << " failed\n";
      if (!run.records.empty() && run.stats.failed == run.records.size()) {
        std::cerr << "error: every backend request failed\n";
        return ger::kExitBackend;
      }
    } else if (*evaluate) {
      auto cfg = make_config(config_path, o);
      auto r = ger::cmd_evaluate(cfg);
      for (const auto& s : r.systems)
        std::cout << s.system << '\t' << ger::format_pct(s.wer.percent) << '\n';
    } else if (*report) {
      fs::path out = o.out_dir ? fs::path(*o.out_dir) : fs::path("out");
      if (o.out_dir == std::nullopt && !config_path.empty())
        out = make_config(config_path, o).out_dir;
      ger::cmd_report(report_json.empty() ? out / "report.json" : fs::path(report_json), out);
    }
  } catch (const ger::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ger::kExitConfig;
  } catch (const ger::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return ger::kExitData;
  } catch (const ger::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return ger::kExitData;
  } catch (const ger::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return ger::kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ger::kExitFailure;
  }
  return ger::kExitOk;
}
