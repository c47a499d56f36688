#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "ger/ctc.hpp"
#include "ger/error.hpp"
#include "ger/ngram.hpp"
#include "support.hpp"

using namespace ger;
using test::TempDir;

namespace {

LogitMatrix from_probs(const std::vector<std::vector<double>>& rows) {
  LogitMatrix m;
  m.utt_id = "m";
  m.frames = rows.size();
  m.vocab = rows.front().size();
  for (auto& r : rows)
    for (double p : r) m.values.push_back(std::log(p));
  validate_and_normalize(m, false);
  return m;
}

double total_mass(const std::vector<std::pair<std::string, double>>& all) {
  double s = 0;
  for (auto& [t, lp] : all) s += std::exp(lp);
  return s;
}

}  // namespace

TEST_CASE("text logits load") {
  TempDir d;
  std::ofstream(d / "u1.txt") << "2 3 0 0\n"
                              << std::log(0.5) << " " << std::log(0.25) << " " << std::log(0.25) << "\n"
                              << std::log(0.1) << " " << std::log(0.1) << " " << std::log(0.8) << "\n";
  const auto m = load_logits(d / "u1.txt");
  CHECK(m.frames == 2);
  CHECK(m.vocab == 3);
  CHECK(m.utt_id == "u1");
  CHECK(std::exp(m.at(1, 2)) == doctest::Approx(0.8));
}

TEST_CASE("raw logits are log-softmaxed") {
  TempDir d;
  std::ofstream(d / "r.txt") << "1 3 0 1\n0 0 0\n";
  const auto m = load_logits(d / "r.txt");
  for (std::size_t v = 0; v < 3; ++v) CHECK(m.at(0, v) == doctest::Approx(std::log(1.0 / 3)));
}

TEST_CASE("unnormalized rows rejected unless raw") {
  TempDir d;
  std::ofstream(d / "r.txt") << "1 3 0 0\n0 0 0\n";
  CHECK_THROWS_AS(load_logits(d / "r.txt"), DataError);
  std::ofstream(d / "n.txt") << "1 2 0 1\nnan 0\n";
  CHECK_THROWS_AS(load_logits(d / "n.txt"), DataError);
  std::ofstream(d / "b.txt") << "1 2 5 1\n0 0\n";
  CHECK_THROWS_AS(load_logits(d / "b.txt"), FormatError);
}

TEST_CASE("binary round trip and truncation") {
  TempDir d;
  std::mt19937 rng(3);
  auto m = test::random_logits(rng, 4, 5);
  m.utt_id = "bin";
  save_logits_binary(d / "bin.ctcl", m);
  const auto back = load_logits(d / "bin.ctcl");
  REQUIRE(back.frames == 4);
  REQUIRE(back.vocab == 5);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(m.values[i]).epsilon(1e-5));

  save_logits_text(d / "txt.txt", m);
  const auto t = load_logits(d / "txt.txt");
  for (std::size_t i = 0; i < m.values.size(); ++i)
    CHECK(t.values[i] == doctest::Approx(m.values[i]).epsilon(1e-7));

  auto bytes = read_file(d / "bin.ctcl");
  bytes.resize(bytes.size() - 7);
  std::ofstream(d / "cut.ctcl", std::ios::binary) << bytes;
  try {
    load_logits(d / "cut.ctcl");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("80") != std::string::npos);  // 4 * 5 * 4 bytes expected
    CHECK(msg.find("73") != std::string::npos);
  }
  auto bad = read_file(d / "bin.ctcl");
  bad[4] = 9;  // version
  std::ofstream(d / "ver.ctcl", std::ios::binary) << bad;
  CHECK_THROWS_AS(load_logits(d / "ver.ctcl"), FormatError);
}

TEST_CASE("vocab") {
  TempDir d;
  std::ofstream(d / "v.txt") << "<blank>\n|\na\nb\n";
  const auto v = load_vocab(d / "v.txt", "|");
  CHECK(v.size() == 4);
  CHECK(v.word_delimiter == 1);
  CHECK_THROWS_AS(load_vocab(d / "v.txt", " "), ConfigError);
  CHECK_THROWS_AS(make_vocab({"_", "a", "a"}, "a"), ConfigError);
  CHECK_THROWS_AS(make_vocab({"_", "|"}, "|", 4), ConfigError);
}

TEST_CASE("collapse") {
  const auto v = make_vocab({"_", "|", "a", "d", "e", "w"}, "|");
  const int blank = 0, delim = 1, a = 2, dd = 3, e = 4, w = 5;
  CHECK(collapse(std::vector<int>{a, a, blank, a}, v) == "aa");
  CHECK(collapse(std::vector<int>{blank, blank}, v) == "");
  CHECK(collapse(std::vector<int>{dd, e, delim, w, delim}, v) == "de w");
  CHECK(collapse(std::vector<int>{delim, delim, a, delim, delim, blank, delim, a}, v) == "a a");
  CHECK(collapse(std::vector<int>{}, v) == "");
}

TEST_CASE("single frame decode") {
  const auto v = make_vocab({"_", "|", "a"}, "|");
  const auto m = from_probs({{0.1 - 1e-12, 1e-12, 0.9}});
  DecodeConfig cfg;
  const auto l = ctc_beam_search(m, v, cfg);
  CHECK(l.top().text == "a");
  CHECK(l.top().score == doctest::Approx(std::log(0.9)).epsilon(1e-9));
  CHECK(l.top().rank == 1);
}

TEST_CASE("config errors") {
  const auto v = make_vocab({"_", "|", "a"}, "|");
  const auto m = from_probs({{0.2, 0.3, 0.5}});
  DecodeConfig cfg;
  cfg.beam_width = 4;
  cfg.n_best = 5;
  CHECK_THROWS_AS(ctc_beam_search(m, v, cfg), ConfigError);
  cfg.n_best = 2;
  cfg.lm_weight = 1.0;
  CHECK_THROWS_AS(ctc_beam_search(m, v, cfg, nullptr), ConfigError);
  cfg.lm_weight = -1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  const auto v4 = make_vocab({"_", "|", "a", "b"}, "|");
  cfg.lm_weight = 0;
  CHECK_THROWS_AS(ctc_beam_search(m, v4, cfg), DataError);
}

TEST_CASE("brute force: single frame equals the row") {
  const auto v = make_vocab({"_", "|", "a", "b"}, "|");
  const auto m = from_probs({{0.05, 0.15, 0.35, 0.45}});
  const auto all = ctc_brute_force(m, v, 10);
  REQUIRE(all.size() == 3);  // "" gathers blank and delimiter
  CHECK(all[0].first == "b");
  CHECK(std::exp(all[0].second) == doctest::Approx(0.45));
  CHECK(all[1].first == "a");
  CHECK(std::exp(all[1].second) == doctest::Approx(0.35));
  CHECK(all[2].first == "");
  CHECK(std::exp(all[2].second) == doctest::Approx(0.2));
}

TEST_CASE("brute force: two frames by hand") {
  // classes: blank, delimiter, a
  const auto v = make_vocab({"_", "|", "a"}, "|");
  const double b1 = 0.5, d1 = 0.2, a1 = 0.3, b2 = 0.6, d2 = 0.1, a2 = 0.3;
  const auto m = from_probs({{b1, d1, a1}, {b2, d2, a2}});
  const auto all = ctc_brute_force(m, v, 10);
  std::map<std::string, double> p;
  for (auto& [t, lp] : all) p[t] = std::exp(lp);
  // "a": a_, _a, aa, a|, |a
  CHECK(p["a"] == doctest::Approx(a1 * b2 + b1 * a2 + a1 * a2 + a1 * d2 + d1 * a2));
  CHECK(p[""] == doctest::Approx((b1 + d1) * (b2 + d2)));
  CHECK(p["a"] + p[""] == doctest::Approx(1.0));
}

TEST_CASE("brute force: total probability and guard") {
  std::mt19937 rng(11);
  for (int i = 0; i < 20; ++i) {
    const std::size_t T = 1 + rng() % 6, V = 3 + rng() % 2;
    const auto m = test::random_logits(rng, T, V);
    CHECK(total_mass(ctc_brute_force(m, test::small_vocab(V), 1u << 20)) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
  const auto big = test::random_logits(rng, 12, 4);
  CHECK_THROWS_AS(ctc_brute_force(big, test::small_vocab(4), 5), std::invalid_argument);
}

TEST_CASE("beam matches brute force on a 3x3 matrix") {
  std::mt19937 rng(2024);
  const auto m = test::random_logits(rng, 3, 3);
  const auto v = test::small_vocab(3);
  DecodeConfig cfg;
  cfg.beam_width = 64;
  const auto beam = ctc_beam_search(m, v, cfg);
  const auto exact = ctc_brute_force(m, v, 5);
  REQUIRE(beam.size() == exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    CHECK(beam.hypotheses[i].text == exact[i].first);
    CHECK(beam.hypotheses[i].score == doctest::Approx(exact[i].second).epsilon(1e-9));
  }
}

TEST_CASE("unpruned beam matches brute force on random matrices") {
  std::mt19937 rng(424242);
  DecodeConfig cfg;
  cfg.beam_width = 100000;  // nothing gets pruned at these sizes
  for (int i = 0; i < 200; ++i) {
    const std::size_t T = 1 + rng() % 6, V = 3 + rng() % 2;
    const auto m = test::random_logits(rng, T, V);
    const auto v = test::small_vocab(V);
    const auto beam = ctc_beam_search(m, v, cfg);
    const auto exact = ctc_brute_force(m, v, 1000000);
    CHECK(beam.top().text == exact[0].first);
    CHECK(std::abs(beam.top().score - exact[0].second) < 1e-6);
    if (exact.size() >= 5) {
      std::set<std::string> a, b;
      for (auto& h : beam.hypotheses) a.insert(h.text);
      for (std::size_t k = 0; k < 5; ++k) b.insert(exact[k].first);
      CHECK(a == b);
    }
  }
}

TEST_CASE("decode is deterministic") {
  std::mt19937 rng(5);
  const auto m = test::random_logits(rng, 6, 4);
  DecodeConfig cfg;
  cfg.beam_width = 3;
  cfg.n_best = 3;
  const auto v = test::small_vocab(4);
  CHECK(ctc_beam_search(m, v, cfg) == ctc_beam_search(m, v, cfg));
}

TEST_CASE("a pruned beam never beats the unpruned one") {
  std::mt19937 rng(8080);
  int violations = 0, trials = 0;
  for (int i = 0; i < 300; ++i) {
    const std::size_t T = 2 + rng() % 7, V = 3 + rng() % 3;
    const auto m = test::random_logits(rng, T, V);
    const auto v = test::small_vocab(V);
    DecodeConfig full;
    full.beam_width = 1000000;
    full.n_best = 1;
    const double best = ctc_beam_search(m, v, full).top().score;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t w : {1, 2, 3, 4, 8, 16, 64}) {
      DecodeConfig cfg;
      cfg.beam_width = w;
      cfg.n_best = 1;
      const double s = ctc_beam_search(m, v, cfg).top().score;
      CHECK(s <= best + 1e-9);
      // between two finite widths this can go either way
      ++trials;
      if (s < prev - 1e-12) ++violations;
      prev = std::max(prev, s);
    }
  }
  MESSAGE("narrower-beats-wider cases: " << violations << " / " << trials);
}

TEST_CASE("fusion never hurts an in-vocabulary candidate") {
  std::mt19937 rng(31337);
  const auto v = make_vocab({"_", "|", "a", "b"}, "|");
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    const auto m = test::random_logits(rng, 3, 4);
    DecodeConfig cfg;
    cfg.beam_width = 64;
    cfg.n_best = 5;
    const auto plain = ctc_beam_search(m, v, cfg);
    // a single-word candidate below rank 1
    const Hypothesis* cand = nullptr;
    for (auto& h : plain.hypotheses)
      if (h.rank > 1 && !h.text.empty() && h.text.find(' ') == std::string::npos) {
        cand = &h;
        break;
      }
    if (!cand) continue;
    std::vector<Tokens> corpus(10, Tokens{cand->text});
    const auto lm = TrigramLM::train(corpus);
    cfg.lm_weight = 1.0;
    const auto fused = ctc_beam_search(m, v, cfg, &lm);
    int new_rank = 99;
    for (auto& h : fused.hypotheses)
      if (h.text == cand->text) new_rank = h.rank;
    CHECK(new_rank <= cand->rank);
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("word bonus favours more words") {
  // "a b" vs "ab": the delimiter frame is close to a coin flip
  const auto v = make_vocab({"_", "|", "a", "b"}, "|");
  const auto m = from_probs({{0.01, 0.01, 0.97, 0.01}, {0.3, 0.6, 0.05, 0.05}, {0.01, 0.01, 0.01, 0.97}});
  DecodeConfig cfg;
  cfg.n_best = 2;
  auto l = ctc_beam_search(m, v, cfg);
  REQUIRE(l.size() == 2);
  CHECK(l.top().text == "a b");
  std::vector<Tokens> corpus(5, Tokens{"ab"});
  const auto lm = TrigramLM::train(corpus);
  cfg.lm_weight = 1.0;
  l = ctc_beam_search(m, v, cfg, &lm);
  CHECK(l.top().text == "ab");
  cfg.word_bonus = 10.0;
  l = ctc_beam_search(m, v, cfg, &lm);
  CHECK(l.top().text == "a b");
}

TEST_CASE("fixture logits decode") {
  const auto v = load_vocab(test::kFixture / "vocab.txt", "|");
  const auto m = load_logits(test::kFixture / "logits" / "a01.txt");
  DecodeConfig cfg;
  const auto l = ctc_beam_search(m, v, cfg);
  CHECK(l.top().text == "de wei");
  CHECK(l.size() == 5);
}
