// Serial vs OpenMP batch kernels on synthetic corpora.
#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "ger/kernels.hpp"

using namespace ger;
namespace k = ger::kernels;

namespace {

Tokens words(std::mt19937& rng, std::size_t max_len) {
  static const std::vector<std::string> lex{"de", "it", "in", "fan", "op", "en", "wie", "hy", "net", "dat"};
  std::uniform_int_distribution<std::size_t> len(1, max_len), pick(0, lex.size() - 1);
  Tokens t(len(rng));
  for (auto& w : t) w = lex[pick(rng)];
  return t;
}

struct Texts {
  std::vector<Tokens> refs, base, corr;
  std::vector<NBestList> lists;
};

const Texts& texts() {
  static const Texts c = [] {
    std::mt19937 rng(99);
    Texts c;
    for (int i = 0; i < 4000; ++i) {
      c.refs.push_back(words(rng, 30));
      NBestList l{"u" + std::to_string(i), {}};
      for (int r = 0; r < 5; ++r) l.hypotheses.push_back({join(words(rng, 30)), -double(r), r + 1});
      c.base.push_back(tokenize(l.top().text));
      c.corr.push_back(words(rng, 30));
      c.lists.push_back(std::move(l));
    }
    return c;
  }();
  return c;
}

const std::vector<LogitMatrix>& logits() {
  static const std::vector<LogitMatrix> ms = [] {
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<LogitMatrix> ms(64);
    for (auto& m : ms) {
      m.frames = 120;
      m.vocab = 12;
      m.values.resize(m.frames * m.vocab);
      for (auto& x : m.values) x = g(rng);
      validate_and_normalize(m, true);
    }
    return ms;
  }();
  return ms;
}

k::Exec mode(const benchmark::State& s) { return s.range(0) ? k::Exec::parallel : k::Exec::serial; }

void BM_Score(benchmark::State& s) {
  const auto& c = texts();
  for (auto _ : s) benchmark::DoNotOptimize(k::score(c.refs, c.base, mode(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<int64_t>(c.refs.size()));
}

void BM_Compare(benchmark::State& s) {
  const auto& c = texts();
  for (auto _ : s) benchmark::DoNotOptimize(k::compare(c.refs, c.base, c.corr, mode(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<int64_t>(c.refs.size()));
}

void BM_Oracle(benchmark::State& s) {
  const auto& c = texts();
  for (auto _ : s) benchmark::DoNotOptimize(k::oracle(c.refs, c.lists, NormConfig{}, mode(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<int64_t>(c.refs.size()));
}

void BM_Decode(benchmark::State& s) {
  const auto& ms = logits();
  const Vocab v = make_vocab({"_", "|", "a", "d", "e", "i", "k", "n", "r", "s", "t", "w"}, "|", 0);
  DecodeConfig cfg;
  cfg.beam_width = 16;
  for (auto _ : s) benchmark::DoNotOptimize(k::decode(ms, v, cfg, nullptr, mode(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<int64_t>(ms.size()));
}

}  // namespace

// arg 0 = serial, 1 = parallel
BENCHMARK(BM_Score)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Compare)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Oracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Decode)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
