#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ger/align.hpp"

namespace ger {

enum class Category { improved, degraded, unchanged };
std::string to_string(Category c);

struct SentenceCategory {
  std::string utt_id;
  Category category = Category::unchanged;
  std::size_t base_errors = 0;
  std::size_t corr_errors = 0;
};

// Compares raw error counts; both counts must be against the same reference.
SentenceCategory categorize_sentence(const EditCounts& base, const EditCounts& corr,
                                     std::string utt_id = {});

enum class ErrorType { S = 0, D = 1, I = 2 };
inline constexpr std::array<ErrorType, 3> kErrorTypes{ErrorType::S, ErrorType::D, ErrorType::I};
std::string to_string(ErrorType t);

// One reference-anchored error. S and D anchor at the reference token index;
// I anchors at the gap, i.e. the number of reference tokens consumed before
// the inserted token. payload is the hypothesis token (empty for D).
struct AnchoredError {
  ErrorType type;
  std::size_t anchor;
  std::string payload;

  friend auto operator<=>(const AnchoredError&, const AnchoredError&) = default;
};

// Sorted multiset of the alignment's non-match operations.
std::vector<AnchoredError> extract_anchored_errors(const Alignment& a, std::span<const Token> hyp);

struct TypeCounts {
  std::size_t tp = 0;  // baseline errors the correction removed
  std::size_t fn = 0;  // baseline errors still present
  std::size_t fp = 0;  // errors the correction introduced

  TypeCounts& operator+=(const TypeCounts& o);
  friend bool operator==(const TypeCounts&, const TypeCounts&) = default;
};

struct EditAnalysis {
  std::array<TypeCounts, 3> by_type{};

  TypeCounts& operator[](ErrorType t) { return by_type[static_cast<std::size_t>(t)]; }
  const TypeCounts& operator[](ErrorType t) const { return by_type[static_cast<std::size_t>(t)]; }
  TypeCounts total() const;
  EditAnalysis& operator+=(const EditAnalysis& o);
  friend bool operator==(const EditAnalysis&, const EditAnalysis&) = default;
};

// Baseline errors that reappear in the corrected output with the same type,
// anchor and payload are false negatives (multiset intersection); the rest of
// the baseline errors are true positives and the rest of the corrected
// errors are false positives. This keeps, per type, tp + fn equal to the
// baseline error count and, summed over types, fn + fp equal to the corrected
// error count.
EditAnalysis edit_level_analysis(std::span<const Token> ref, std::span<const Token> baseline,
                                 std::span<const Token> corrected);

struct PrecisionRecall {
  std::optional<double> precision;  // percent; empty when tp + fp == 0
  std::optional<double> recall;     // percent; empty when tp + fn == 0
};

PrecisionRecall precision_recall(const TypeCounts& c);

struct EditReport {
  std::array<PrecisionRecall, 3> by_type;
  PrecisionRecall total;
};

EditReport precision_recall(const EditAnalysis& ea);

struct CategoryShares {
  std::size_t improved = 0, degraded = 0, unchanged = 0;
  double improved_pct = 0.0, degraded_pct = 0.0, unchanged_pct = 0.0;
  std::size_t total() const { return improved + degraded + unchanged; }
};

CategoryShares share_categories(std::span<const SentenceCategory> cats);

// One evaluated system, pooled over the corpus.
struct ExperimentSummary {
  std::string system;
  CorpusWer wer;
  CategoryShares categories;
  EditAnalysis edits;  // per-type counts summed before precision/recall
  EditReport edit_metrics;
};

ExperimentSummary aggregate(std::string system, std::span<const SentenceCategory> categories,
                            std::span<const EditAnalysis> analyses, const CorpusWer& wer);

}  // namespace ger
