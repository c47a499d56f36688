#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ger/text.hpp"

namespace ger {

struct NBestList;

struct TrigramTrainOptions {
  // Words seen fewer than min_count times map to <unk>. 1 keeps every word.
  std::size_t min_count = 1;
  std::string trained_on;
};

// Interpolated Witten-Bell trigram model over whole words.
//
// Each order interpolates its maximum-likelihood estimate with the next lower
// order, weighting the lower order by the number of distinct word types seen
// after the history:
//
//   P(w | h) = (c(h w) + T(h) * P_lower(w)) / (c(h) + T(h))
//
// Histories never seen in training fall through to the lower order. The base
// distribution is uniform over the predictable vocabulary (words, <unk>, </s>),
// so every word has non-zero probability under every history.
//
// The model is immutable once built and safe to share between threads.
class TrigramLM {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";

  static TrigramLM train(std::span<const Tokens> sentences, const TrigramTrainOptions& opts = {});

  // h holds up to two preceding words, oldest first; longer histories use the
  // last two. Unknown words map to <unk>. Pass kBos for sentence-start context.
  double cond_prob(std::string_view w, std::span<const std::string> h) const;
  double cond_prob(std::string_view w, std::initializer_list<std::string_view> h) const;

  // Natural-log probability of the sentence padded with <s> <s> ... </s>.
  double sentence_logprob(std::span<const Token> tokens) const;

  // Vocabulary ids for incremental scoring.
  using WordId = std::int32_t;
  WordId id(std::string_view w) const;  // <unk> when not in vocabulary
  WordId bos() const { return 0; }
  WordId eos() const { return 1; }
  WordId unk() const { return 2; }
  double cond_prob_id(WordId w, WordId h2, WordId h1) const;  // h2 oldest; -1 = absent

  // Predictable vocabulary: every word plus <unk> and </s> (not <s>).
  std::vector<std::string> predictable_vocab() const;
  const std::vector<std::string>& words() const { return words_; }  // id -> word
  bool in_vocab(std::string_view w) const;
  const std::string& trained_on() const { return trained_on_; }

  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static TrigramLM load(const std::filesystem::path& path);
  static TrigramLM deserialize(const std::string& text);

 private:
  struct Stats {
    std::uint64_t total = 0;  // c(h): tokens observed after h
    std::uint64_t types = 0;  // T(h): distinct followers
  };

  double unigram(WordId w) const;
  double bigram(WordId w, WordId h1) const;
  double trigram(WordId w, WordId h2, WordId h1) const;
  void finalize();

  static std::uint64_t key2(WordId a, WordId b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }
  static std::uint64_t key3(WordId a, WordId b, WordId c) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 42) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)) << 21) |
           static_cast<std::uint32_t>(c);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
  std::string trained_on_;
  std::size_t min_count_ = 1;

  std::vector<std::uint64_t> uni_counts_;
  std::unordered_map<std::uint64_t, std::uint64_t> bi_counts_;   // (h1, w)
  std::unordered_map<std::uint64_t, std::uint64_t> tri_counts_;  // (h2, h1, w)
  Stats uni_stats_;
  std::unordered_map<WordId, Stats> bi_stats_;         // keyed by h1
  std::unordered_map<std::uint64_t, Stats> tri_stats_;  // keyed by (h2, h1)
};

// Re-ranks by score + alpha * sentence_logprob + beta * word_count. Ties keep
// their previous order. Scores are replaced by the combined value.
NBestList rescore_nbest(const TrigramLM& lm, const NBestList& nbest, double alpha, double beta,
                        const NormConfig& norm = {});

}  // namespace ger
