#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ger/text.hpp"

namespace ger {

struct NBestList;

enum class EditOp { match, sub, del, ins };

struct AlignedPair {
  EditOp op;
  std::optional<std::size_t> ref_index;  // match, sub, del
  std::optional<std::size_t> hyp_index;  // match, sub, ins

  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

struct Alignment {
  std::vector<AlignedPair> ops;

  std::size_t cost() const;
  friend bool operator==(const Alignment&, const Alignment&) = default;
};

struct EditCounts {
  std::size_t n_ref = 0;
  std::size_t sub = 0;
  std::size_t del = 0;
  std::size_t ins = 0;
  std::size_t match = 0;

  std::size_t errors() const { return sub + del + ins; }
  EditCounts& operator+=(const EditCounts& o);
  friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

// Minimum edit distance alignment under unit costs. Among optimal paths the
// ones with fewest insertions+deletions are kept (so swapping ref and hyp
// swaps D and I and leaves S alone). Remaining ties: walking from the start,
// diagonal beats deletion, deletion beats insertion.
Alignment align(std::span<const Token> ref, std::span<const Token> hyp);

// Plain Wagner-Fischer distance, two rows, no backtrace.
std::size_t edit_distance(std::span<const Token> ref, std::span<const Token> hyp);

// Throws std::invalid_argument if the alignment does not cover n_ref tokens.
EditCounts wer_counts(const Alignment& a, std::size_t n_ref);

EditCounts score(std::span<const Token> ref, std::span<const Token> hyp);

// Per-utterance WER in percent; empty when the reference has no tokens.
std::optional<double> utterance_wer(const EditCounts& c);

struct CorpusWer {
  double percent = 0.0;
  std::size_t errors = 0;
  std::size_t ref_tokens = 0;
  std::size_t sub = 0, del = 0, ins = 0;
  std::size_t utterances = 0;
  std::size_t empty_references = 0;  // excluded from both sums
};

// 100 * sum(errors) / sum(n_ref), skipping n_ref == 0. Throws DataError when
// every reference is empty.
CorpusWer corpus_wer(std::span<const EditCounts> counts);

struct OracleChoice {
  int index = 1;  // 1-based rank of the chosen hypothesis
  EditCounts counts;
};

// Hypothesis with the fewest errors against ref; ties go to the best rank.
OracleChoice oracle_select(std::span<const Token> ref, const NBestList& nbest,
                           const NormConfig& cfg = {});

}  // namespace ger
