#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ger/data_model.hpp"

namespace ger {

class TrigramLM;

// Frame-major T x V matrix of log-probabilities.
struct LogitMatrix {
  std::string utt_id;
  std::size_t frames = 0;  // T
  std::size_t vocab = 0;   // V
  std::size_t blank_index = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t v) const { return values[t * vocab + v]; }
  std::span<const double> row(std::size_t t) const {
    return {values.data() + t * vocab, vocab};
  }
};

// Checks dimensions, blank index, finiteness and (unless raw) row normalization.
// Raw logits are converted in place by a row-wise log-softmax.
void validate_and_normalize(LogitMatrix& m, bool raw_logits);

// Binary "CTCL" files and the whitespace text alternative are detected by the
// first four bytes. utt_id is the file stem.
LogitMatrix load_logits(const std::filesystem::path& path);
void save_logits_binary(const std::filesystem::path& path, const LogitMatrix& m);
void save_logits_text(const std::filesystem::path& path, const LogitMatrix& m);

struct Vocab {
  std::vector<std::string> tokens;  // index = CTC class id
  std::size_t blank_index = 0;
  std::size_t word_delimiter = 0;   // class id rendered as a space

  std::size_t size() const { return tokens.size(); }
};

Vocab make_vocab(std::vector<std::string> tokens, const std::string& word_delimiter,
                 std::size_t blank_index = 0);
Vocab load_vocab(const std::filesystem::path& path, const std::string& word_delimiter,
                 std::size_t blank_index = 0);

// CTC collapse: merge adjacent repeats, drop blanks, render delimiters as
// single spaces, trim.
std::string collapse(std::span<const int> labels, const Vocab& vocab);

struct DecodeConfig {
  std::size_t beam_width = 50;
  std::size_t n_best = 5;
  double lm_weight = 0.0;    // alpha
  double word_bonus = 0.0;   // beta
  // Per-frame symbol pruning: labels with log-prob below this are skipped.
  double prune_log_threshold = -std::numeric_limits<double>::infinity();
};

void validate(const DecodeConfig& cfg);

// CTC prefix beam search. Prefixes sharing the same collapsed text are merged
// so the returned hypotheses are distinct strings. With lm_weight > 0 the
// trigram is applied at each word boundary (shallow fusion); the final score
// of a hypothesis is
//   log P_ctc + alpha * log P_lm(words, </s>) + beta * #words.
// Output is sorted by score descending, ties broken by text.
NBestList ctc_beam_search(const LogitMatrix& m, const Vocab& vocab, const DecodeConfig& cfg,
                          const TrigramLM* lm = nullptr);

// Exact CTC marginals by enumerating all V^T frame paths. Test oracle; refuses
// inputs with V^T > 1e7.
std::vector<std::pair<std::string, double>> ctc_brute_force(const LogitMatrix& m,
                                                            const Vocab& vocab, std::size_t n);

}  // namespace ger
