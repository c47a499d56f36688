#include "ger/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "ger/data_model.hpp"
#include "ger/error.hpp"

namespace ger {

namespace {
constexpr std::string_view kFileMagic = "#ger-trigram";
constexpr int kFileVersion = 1;
}  // namespace

TrigramLM TrigramLM::train(std::span<const Tokens> sentences, const TrigramTrainOptions& opts) {
  const bool any = std::any_of(sentences.begin(), sentences.end(),
                               [](const Tokens& s) { return !s.empty(); });
  if (!any) throw DataError("cannot train a trigram model on an empty corpus");

  std::map<std::string, std::size_t> freq;
  for (const auto& s : sentences)
    for (const auto& w : s) ++freq[w];

  TrigramLM lm;
  lm.trained_on_ = opts.trained_on;
  lm.min_count_ = std::max<std::size_t>(opts.min_count, 1);
  lm.words_ = {std::string(kBos), std::string(kEos), std::string(kUnk)};
  for (const auto& [w, c] : freq) {  // std::map: sorted, so ids are deterministic
    if (c < lm.min_count_) continue;
    if (w == kBos || w == kEos || w == kUnk) continue;
    lm.words_.push_back(w);
  }
  for (std::size_t i = 0; i < lm.words_.size(); ++i)
    lm.index_.emplace(lm.words_[i], static_cast<WordId>(i));

  lm.uni_counts_.assign(lm.words_.size(), 0);
  for (const auto& s : sentences) {
    if (s.empty()) continue;
    WordId h2 = lm.bos(), h1 = lm.bos();
    auto count = [&](WordId w) {
      ++lm.uni_counts_[static_cast<std::size_t>(w)];
      ++lm.bi_counts_[key2(h1, w)];
      ++lm.tri_counts_[key3(h2, h1, w)];
      h2 = h1;
      h1 = w;
    };
    for (const auto& w : s) count(lm.id(w));
    count(lm.eos());
  }
  lm.finalize();
  return lm;
}

void TrigramLM::finalize() {
  index_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<WordId>(i));
  uni_stats_ = {};
  for (auto c : uni_counts_) {
    uni_stats_.total += c;
    if (c) ++uni_stats_.types;
  }
  bi_stats_.clear();
  for (const auto& [k, c] : bi_counts_) {
    auto& st = bi_stats_[static_cast<WordId>(k >> 32)];
    st.total += c;
    ++st.types;
  }
  tri_stats_.clear();
  for (const auto& [k, c] : tri_counts_) {
    auto& st = tri_stats_[k >> 21];
    st.total += c;
    ++st.types;
  }
}

TrigramLM::WordId TrigramLM::id(std::string_view w) const {
  auto it = index_.find(std::string(w));
  if (it == index_.end() || it->second == bos()) return unk();
  return it->second;
}

bool TrigramLM::in_vocab(std::string_view w) const {
  auto it = index_.find(std::string(w));
  return it != index_.end() && it->second > unk();
}

std::vector<std::string> TrigramLM::predictable_vocab() const {
  std::vector<std::string> out(words_.begin() + 1, words_.end());
  return out;
}

double TrigramLM::unigram(WordId w) const {
  const double uniform = 1.0 / static_cast<double>(words_.size() - 1);  // all but <s>
  const double c = static_cast<double>(uni_counts_[static_cast<std::size_t>(w)]);
  return (c + static_cast<double>(uni_stats_.types) * uniform) /
         static_cast<double>(uni_stats_.total + uni_stats_.types);
}

double TrigramLM::bigram(WordId w, WordId h1) const {
  const double lower = unigram(w);
  auto st = bi_stats_.find(h1);
  if (st == bi_stats_.end()) return lower;
  auto it = bi_counts_.find(key2(h1, w));
  const double c = it == bi_counts_.end() ? 0.0 : static_cast<double>(it->second);
  return (c + static_cast<double>(st->second.types) * lower) /
         static_cast<double>(st->second.total + st->second.types);
}

double TrigramLM::trigram(WordId w, WordId h2, WordId h1) const {
  const double lower = bigram(w, h1);
  auto st = tri_stats_.find(key3(h2, h1, 0) >> 21);
  if (st == tri_stats_.end()) return lower;
  auto it = tri_counts_.find(key3(h2, h1, w));
  const double c = it == tri_counts_.end() ? 0.0 : static_cast<double>(it->second);
  return (c + static_cast<double>(st->second.types) * lower) /
         static_cast<double>(st->second.total + st->second.types);
}

double TrigramLM::cond_prob_id(WordId w, WordId h2, WordId h1) const {
  if (w == bos()) w = unk();
  if (h1 < 0) return unigram(w);
  if (h2 < 0) return bigram(w, h1);
  return trigram(w, h2, h1);
}

namespace {
// <s> is a valid history word, unlike in id().
TrigramLM::WordId history_id(const TrigramLM& lm, std::string_view w) {
  return w == TrigramLM::kBos ? lm.bos() : lm.id(w);
}
}  // namespace

double TrigramLM::cond_prob(std::string_view w, std::span<const std::string> h) const {
  WordId h1 = -1, h2 = -1;
  if (!h.empty()) h1 = history_id(*this, h[h.size() - 1]);
  if (h.size() >= 2) h2 = history_id(*this, h[h.size() - 2]);
  return cond_prob_id(w == kEos ? eos() : id(w), h2, h1);
}

double TrigramLM::cond_prob(std::string_view w, std::initializer_list<std::string_view> h) const {
  std::vector<std::string> hv(h.begin(), h.end());
  return cond_prob(w, std::span<const std::string>(hv));
}

double TrigramLM::sentence_logprob(std::span<const Token> tokens) const {
  WordId h2 = bos(), h1 = bos();
  double lp = 0.0;
  for (const auto& t : tokens) {
    const WordId w = id(t);
    lp += std::log(cond_prob_id(w, h2, h1));
    h2 = h1;
    h1 = w;
  }
  return lp + std::log(cond_prob_id(eos(), h2, h1));
}

std::string TrigramLM::serialize() const {
  std::ostringstream out;
  out << kFileMagic << ' ' << kFileVersion << '\n';
  out << "smoothing interpolated-witten-bell\n";
  out << "min_count " << min_count_ << '\n';
  out << "trained_on " << trained_on_ << '\n';
  out << "vocab " << words_.size() << '\n';
  for (const auto& w : words_) out << w << '\n';
  out << "unigrams " << std::count_if(uni_counts_.begin(), uni_counts_.end(),
                                       [](auto c) { return c != 0; })
      << '\n';
  for (std::size_t i = 0; i < uni_counts_.size(); ++i)
    if (uni_counts_[i]) out << i << ' ' << uni_counts_[i] << '\n';

  std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> bi;
  for (const auto& [k, c] : bi_counts_) bi.emplace_back(k >> 32, k & 0xffffffffu, c);
  std::sort(bi.begin(), bi.end());
  out << "bigrams " << bi.size() << '\n';
  for (const auto& [h1, w, c] : bi) out << h1 << ' ' << w << ' ' << c << '\n';

  std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t, std::uint64_t>> tri;
  constexpr std::uint64_t mask = (1u << 21) - 1;
  for (const auto& [k, c] : tri_counts_) tri.emplace_back(k >> 42, (k >> 21) & mask, k & mask, c);
  std::sort(tri.begin(), tri.end());
  out << "trigrams " << tri.size() << '\n';
  for (const auto& [h2, h1, w, c] : tri) out << h2 << ' ' << h1 << ' ' << w << ' ' << c << '\n';
  return out.str();
}

void TrigramLM::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

TrigramLM TrigramLM::deserialize(const std::string& text) {
  std::istringstream in(text);
  auto fail = [](const std::string& why) -> TrigramLM {
    throw FormatError("trigram model: " + why);
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kFileMagic) return fail("missing header");
  if (version != kFileVersion) return fail("unsupported version " + std::to_string(version));

  TrigramLM lm;
  std::string field, value;
  auto expect = [&](const char* name) {
    if (!(in >> field) || field != name) fail(std::string("expected '") + name + "'");
  };
  expect("smoothing");
  in >> value;
  if (value != "interpolated-witten-bell") return fail("unknown smoothing " + value);
  expect("min_count");
  in >> lm.min_count_;
  expect("trained_on");
  in.get();
  std::getline(in, lm.trained_on_);
  expect("vocab");
  std::size_t n = 0;
  in >> n;
  in.get();
  lm.words_.resize(n);
  for (auto& w : lm.words_)
    if (!std::getline(in, w)) return fail("truncated vocabulary");
  if (n < 3 || lm.words_[0] != kBos || lm.words_[1] != kEos || lm.words_[2] != kUnk)
    return fail("reserved symbols missing");
  lm.uni_counts_.assign(n, 0);

  std::size_t count = 0;
  expect("unigrams");
  in >> count;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t w;
    std::uint64_t c;
    if (!(in >> w >> c) || w >= n) return fail("bad unigram entry");
    lm.uni_counts_[w] = c;
  }
  expect("bigrams");
  in >> count;
  for (std::size_t i = 0; i < count; ++i) {
    std::int64_t h1, w;
    std::uint64_t c;
    if (!(in >> h1 >> w >> c) || h1 < 0 || w < 0 || static_cast<std::size_t>(std::max(h1, w)) >= n)
      return fail("bad bigram entry");
    lm.bi_counts_[key2(static_cast<WordId>(h1), static_cast<WordId>(w))] = c;
  }
  expect("trigrams");
  in >> count;
  for (std::size_t i = 0; i < count; ++i) {
    std::int64_t h2, h1, w;
    std::uint64_t c;
    if (!(in >> h2 >> h1 >> w >> c) || h2 < 0 || h1 < 0 || w < 0 ||
        static_cast<std::size_t>(std::max({h2, h1, w})) >= n)
      return fail("bad trigram entry");
    lm.tri_counts_[key3(static_cast<WordId>(h2), static_cast<WordId>(h1), static_cast<WordId>(w))] = c;
  }
  lm.finalize();
  return lm;
}

TrigramLM TrigramLM::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

NBestList rescore_nbest(const TrigramLM& lm, const NBestList& nbest, double alpha, double beta,
                        const NormConfig& norm) {
  if (nbest.hypotheses.empty()) throw std::invalid_argument("rescore_nbest: empty N-best list");
  NBestList out = nbest;
  for (auto& h : out.hypotheses) {
    const Tokens words = tokenize(h.text, norm);
    double s = h.score;
    if (alpha != 0.0) s += alpha * lm.sentence_logprob(words);
    s += beta * static_cast<double>(words.size());
    h.score = s;
  }
  canonicalize(out);
  return out;
}

}  // namespace ger
