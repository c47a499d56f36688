#pragma once

// Corpus-level batch kernels. Each comes as a serial reference and an OpenMP
// version over utterances; both must return identical results.

#include <span>
#include <vector>

#include "ger/align.hpp"
#include "ger/analysis.hpp"
#include "ger/ctc.hpp"

namespace ger::kernels {

enum class Exec { serial, parallel };

// Per-utterance counts of hyps[i] against refs[i].
std::vector<EditCounts> score_serial(std::span<const Tokens> refs, std::span<const Tokens> hyps);
std::vector<EditCounts> score_parallel(std::span<const Tokens> refs, std::span<const Tokens> hyps);

struct UtteranceEval {
  EditCounts base;
  EditCounts corr;
  SentenceCategory category;
  EditAnalysis edits;
};

// Baseline vs corrected comparison for every utterance.
std::vector<UtteranceEval> compare_serial(std::span<const Tokens> refs,
                                          std::span<const Tokens> baseline,
                                          std::span<const Tokens> corrected);
std::vector<UtteranceEval> compare_parallel(std::span<const Tokens> refs,
                                            std::span<const Tokens> baseline,
                                            std::span<const Tokens> corrected);

std::vector<OracleChoice> oracle_serial(std::span<const Tokens> refs,
                                        std::span<const NBestList> nbests, const NormConfig& cfg);
std::vector<OracleChoice> oracle_parallel(std::span<const Tokens> refs,
                                          std::span<const NBestList> nbests,
                                          const NormConfig& cfg);

std::vector<NBestList> decode_serial(std::span<const LogitMatrix> ms, const Vocab& vocab,
                                     const DecodeConfig& cfg, const TrigramLM* lm);
std::vector<NBestList> decode_parallel(std::span<const LogitMatrix> ms, const Vocab& vocab,
                                       const DecodeConfig& cfg, const TrigramLM* lm);

// Dispatchers.
inline std::vector<EditCounts> score(std::span<const Tokens> refs, std::span<const Tokens> hyps,
                                     Exec e = Exec::parallel) {
  return e == Exec::serial ? score_serial(refs, hyps) : score_parallel(refs, hyps);
}
inline std::vector<UtteranceEval> compare(std::span<const Tokens> refs,
                                          std::span<const Tokens> baseline,
                                          std::span<const Tokens> corrected,
                                          Exec e = Exec::parallel) {
  return e == Exec::serial ? compare_serial(refs, baseline, corrected)
                           : compare_parallel(refs, baseline, corrected);
}
inline std::vector<OracleChoice> oracle(std::span<const Tokens> refs,
                                        std::span<const NBestList> nbests, const NormConfig& cfg,
                                        Exec e = Exec::parallel) {
  return e == Exec::serial ? oracle_serial(refs, nbests, cfg) : oracle_parallel(refs, nbests, cfg);
}
inline std::vector<NBestList> decode(std::span<const LogitMatrix> ms, const Vocab& vocab,
                                     const DecodeConfig& cfg, const TrigramLM* lm,
                                     Exec e = Exec::parallel) {
  return e == Exec::serial ? decode_serial(ms, vocab, cfg, lm) : decode_parallel(ms, vocab, cfg, lm);
}

}  // namespace ger::kernels
