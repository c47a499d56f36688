#include "ger/kernels.hpp"

#include <exception>
#include <mutex>
#include <stdexcept>

#include <omp.h>

namespace ger::kernels {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("batch kernels: input lengths differ");
}

// Runs body(i) for i in [0, n) across OpenMP threads. The first exception
// thrown by any iteration is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
  std::mutex mu;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

UtteranceEval compare_one(const Tokens& ref, const Tokens& base, const Tokens& corr) {
  UtteranceEval e;
  e.base = ger::score(ref, base);
  e.corr = ger::score(ref, corr);
  e.category = categorize_sentence(e.base, e.corr);
  e.edits = edit_level_analysis(ref, base, corr);
  return e;
}

}  // namespace

std::vector<EditCounts> score_serial(std::span<const Tokens> refs, std::span<const Tokens> hyps) {
  check_sizes(refs.size(), hyps.size());
  std::vector<EditCounts> out;
  out.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) out.push_back(ger::score(refs[i], hyps[i]));
  return out;
}

std::vector<EditCounts> score_parallel(std::span<const Tokens> refs, std::span<const Tokens> hyps) {
  check_sizes(refs.size(), hyps.size());
  std::vector<EditCounts> out(refs.size());
  parallel_for(refs.size(), [&](std::size_t i) { out[i] = ger::score(refs[i], hyps[i]); });
  return out;
}

std::vector<UtteranceEval> compare_serial(std::span<const Tokens> refs,
                                          std::span<const Tokens> baseline,
                                          std::span<const Tokens> corrected) {
  check_sizes(refs.size(), baseline.size());
  check_sizes(refs.size(), corrected.size());
  std::vector<UtteranceEval> out;
  out.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    out.push_back(compare_one(refs[i], baseline[i], corrected[i]));
  return out;
}

std::vector<UtteranceEval> compare_parallel(std::span<const Tokens> refs,
                                            std::span<const Tokens> baseline,
                                            std::span<const Tokens> corrected) {
  check_sizes(refs.size(), baseline.size());
  check_sizes(refs.size(), corrected.size());
  std::vector<UtteranceEval> out(refs.size());
  parallel_for(refs.size(),
               [&](std::size_t i) { out[i] = compare_one(refs[i], baseline[i], corrected[i]); });
  return out;
}

std::vector<OracleChoice> oracle_serial(std::span<const Tokens> refs,
                                        std::span<const NBestList> nbests, const NormConfig& cfg) {
  check_sizes(refs.size(), nbests.size());
  std::vector<OracleChoice> out;
  out.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) out.push_back(oracle_select(refs[i], nbests[i], cfg));
  return out;
}

std::vector<OracleChoice> oracle_parallel(std::span<const Tokens> refs,
                                          std::span<const NBestList> nbests,
                                          const NormConfig& cfg) {
  check_sizes(refs.size(), nbests.size());
  std::vector<OracleChoice> out(refs.size());
  parallel_for(refs.size(), [&](std::size_t i) { out[i] = oracle_select(refs[i], nbests[i], cfg); });
  return out;
}

std::vector<NBestList> decode_serial(std::span<const LogitMatrix> ms, const Vocab& vocab,
                                     const DecodeConfig& cfg, const TrigramLM* lm) {
  validate(cfg);
  std::vector<NBestList> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.push_back(ctc_beam_search(m, vocab, cfg, lm));
  return out;
}

std::vector<NBestList> decode_parallel(std::span<const LogitMatrix> ms, const Vocab& vocab,
                                       const DecodeConfig& cfg, const TrigramLM* lm) {
  validate(cfg);
  std::vector<NBestList> out(ms.size());
  parallel_for(ms.size(), [&](std::size_t i) { out[i] = ctc_beam_search(ms[i], vocab, cfg, lm); });
  return out;
}

}  // namespace ger::kernels
