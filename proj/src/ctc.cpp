#include "ger/ctc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ger/error.hpp"
#include "ger/ngram.hpp"

namespace ger {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr char kMagic[4] = {'C', 'T', 'C', 'L'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kFlagRawLogits = 1u;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

LogitMatrix parse_binary(const std::string& bytes, const std::string& name) {
  constexpr std::size_t kHeader = 4 + 5 * 4;
  if (bytes.size() < kHeader)
    throw FormatError(name + ": truncated header (" + std::to_string(bytes.size()) + " bytes)");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = read_u32(p + 4);
  if (version != kFormatVersion)
    throw FormatError(name + ": unsupported CTCL version " + std::to_string(version));
  const std::uint32_t flags = read_u32(p + 8);
  LogitMatrix m;
  m.frames = read_u32(p + 12);
  m.vocab = read_u32(p + 16);
  m.blank_index = read_u32(p + 20);
  const std::uint64_t expected = static_cast<std::uint64_t>(m.frames) * m.vocab * 4;
  const std::uint64_t actual = bytes.size() - kHeader;
  if (expected != actual)
    throw FormatError(name + ": payload size mismatch: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(actual));
  m.values.resize(m.frames * m.vocab);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    std::uint32_t bits = read_u32(p + kHeader + 4 * i);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    m.values[i] = f;
  }
  validate_and_normalize(m, (flags & kFlagRawLogits) != 0);
  return m;
}

LogitMatrix parse_text(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw FormatError(name + ": empty logits file");
  std::istringstream hs(header);
  long long t = -1, v = -1, blank = -1;
  unsigned flags = 0;
  if (!(hs >> t >> v >> blank >> flags) || t <= 0 || v <= 0 || blank < 0)
    throw FormatError(name + ": bad header, expected 'T V blank_index flags'");
  LogitMatrix m;
  m.frames = static_cast<std::size_t>(t);
  m.vocab = static_cast<std::size_t>(v);
  m.blank_index = static_cast<std::size_t>(blank);
  m.values.reserve(m.frames * m.vocab);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      double x = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      m.values.push_back(x);
    } catch (const std::out_of_range&) {
      throw DataError(name + ": value out of range: " + tok);
    } catch (const std::invalid_argument&) {
      if (tok == "nan" || tok == "inf" || tok == "-inf")
        throw DataError(name + ": non-finite value " + tok);
      throw FormatError(name + ": not a number: " + tok);
    }
  }
  if (m.values.size() != m.frames * m.vocab)
    throw FormatError(name + ": expected " + std::to_string(m.frames * m.vocab) + " values, got " +
                      std::to_string(m.values.size()));
  validate_and_normalize(m, (flags & kFlagRawLogits) != 0);
  return m;
}

}  // namespace

void validate_and_normalize(LogitMatrix& m, bool raw_logits) {
  if (m.frames == 0 || m.vocab == 0) throw FormatError("logit matrix has a zero dimension");
  if (m.blank_index >= m.vocab)
    throw FormatError("blank index " + std::to_string(m.blank_index) + " out of range for V=" +
                      std::to_string(m.vocab));
  if (m.values.size() != m.frames * m.vocab) throw FormatError("logit matrix size mismatch");
  for (double x : m.values)
    if (!std::isfinite(x)) throw DataError("logit matrix contains a non-finite value");
  for (std::size_t t = 0; t < m.frames; ++t) {
    double* row = m.values.data() + t * m.vocab;
    if (raw_logits) {
      double mx = *std::max_element(row, row + m.vocab);
      double sum = 0.0;
      for (std::size_t v = 0; v < m.vocab; ++v) sum += std::exp(row[v] - mx);
      const double lse = mx + std::log(sum);
      for (std::size_t v = 0; v < m.vocab; ++v) row[v] -= lse;
    } else {
      double sum = 0.0;
      for (std::size_t v = 0; v < m.vocab; ++v) sum += std::exp(row[v]);
      if (std::abs(sum - 1.0) > 1e-5)
        throw DataError("frame " + std::to_string(t) + " probabilities sum to " +
                        std::to_string(sum) + "; set the raw-logits flag for unnormalized input");
    }
  }
}

LogitMatrix load_logits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  LogitMatrix m = bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0
                      ? parse_binary(bytes, path.string())
                      : parse_text(bytes, path.string());
  m.utt_id = path.stem().string();
  return m;
}

void save_logits_binary(const std::filesystem::path& path, const LogitMatrix& m) {
  std::string out(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, 0);
  put_u32(out, static_cast<std::uint32_t>(m.frames));
  put_u32(out, static_cast<std::uint32_t>(m.vocab));
  put_u32(out, static_cast<std::uint32_t>(m.blank_index));
  for (double x : m.values) {
    float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(out, bits);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f.write(out.data(), static_cast<std::streamsize>(out.size())))
    throw IoError("cannot write " + path.string());
}

void save_logits_text(const std::filesystem::path& path, const LogitMatrix& m) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << m.frames << ' ' << m.vocab << ' ' << m.blank_index << " 0\n";
  f.precision(17);
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t v = 0; v < m.vocab; ++v) f << (v ? " " : "") << m.at(t, v);
    f << '\n';
  }
}

Vocab make_vocab(std::vector<std::string> tokens, const std::string& word_delimiter,
                 std::size_t blank_index) {
  Vocab vocab;
  vocab.tokens = std::move(tokens);
  std::set<std::string> seen;
  for (const auto& t : vocab.tokens)
    if (!seen.insert(t).second) throw ConfigError("duplicate vocabulary token '" + t + "'");
  if (blank_index >= vocab.tokens.size())
    throw ConfigError("blank index " + std::to_string(blank_index) + " outside vocabulary");
  auto it = std::find(vocab.tokens.begin(), vocab.tokens.end(), word_delimiter);
  if (it == vocab.tokens.end())
    throw ConfigError("word delimiter '" + word_delimiter + "' is not in the vocabulary");
  vocab.blank_index = blank_index;
  vocab.word_delimiter = static_cast<std::size_t>(it - vocab.tokens.begin());
  if (vocab.word_delimiter == blank_index)
    throw ConfigError("word delimiter cannot be the blank symbol");
  return vocab;
}

Vocab load_vocab(const std::filesystem::path& path, const std::string& word_delimiter,
                 std::size_t blank_index) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return make_vocab(std::move(tokens), word_delimiter, blank_index);
}

namespace {

// Renders a blank-free, repeat-merged label sequence.
std::string render(std::span<const int> labels, const Vocab& vocab) {
  std::string out;
  bool space = false;
  for (int id : labels) {
    if (static_cast<std::size_t>(id) == vocab.word_delimiter) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += vocab.tokens[static_cast<std::size_t>(id)];
  }
  return out;
}

}  // namespace

std::string collapse(std::span<const int> labels, const Vocab& vocab) {
  std::vector<int> kept;
  int prev = -1;
  for (int id : labels) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
      throw std::invalid_argument("label id out of range: " + std::to_string(id));
    if (id != prev && static_cast<std::size_t>(id) != vocab.blank_index) kept.push_back(id);
    prev = id;
  }
  return render(kept, vocab);
}

void validate(const DecodeConfig& cfg) {
  if (cfg.beam_width == 0) throw ConfigError("beam_width must be positive");
  if (cfg.n_best == 0) throw ConfigError("n_best must be positive");
  if (cfg.n_best > cfg.beam_width)
    throw ConfigError("n_best (" + std::to_string(cfg.n_best) + ") exceeds beam_width (" +
                      std::to_string(cfg.beam_width) + ")");
  if (!(cfg.lm_weight >= 0.0)) throw ConfigError("lm_weight must be >= 0");
  if (!std::isfinite(cfg.word_bonus)) throw ConfigError("word_bonus must be finite");
}

namespace {

struct VecHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
    return h;
  }
};

// A label prefix. Keys never start with a delimiter and never hold two
// delimiters in a row, so prefixes that render the same text under every
// continuation share one entry.
struct Prefix {
  double pb = kNegInf;   // mass of paths ending in blank
  double pnb = kNegInf;  // mass of paths ending in the last label
  // Fusion state: words completed so far and their summed LM log-probability.
  double lm = 0.0;
  std::size_t words = 0;
  TrigramLM::WordId h2 = -1, h1 = -1;
  std::string partial;  // characters of the unfinished word

  double ctc() const { return log_add(pb, pnb); }
};

class BeamSearch {
 public:
  BeamSearch(const LogitMatrix& m, const Vocab& vocab, const DecodeConfig& cfg, const TrigramLM* lm)
      : m_(m), vocab_(vocab), cfg_(cfg), lm_(cfg.lm_weight > 0.0 ? lm : nullptr) {}

  NBestList run() {
    Beam beam;
    Prefix root;
    root.pb = 0.0;
    if (lm_) root.h2 = root.h1 = lm_->bos();
    beam.emplace_back(std::vector<int>{}, root);

    const int delim = static_cast<int>(vocab_.word_delimiter);
    const int blank = static_cast<int>(vocab_.blank_index);

    for (std::size_t t = 0; t < m_.frames; ++t) {
      auto row = m_.row(t);
      Map next;
      next.reserve(beam.size() * 4);
      for (const auto& [key, p] : beam) {
        const double total = p.ctc();
        const int last = key.empty() ? -1 : key.back();

        Prefix& same = slot(next, key, p);
        same.pb = log_add(same.pb, total + row[static_cast<std::size_t>(blank)]);

        for (std::size_t c = 0; c < m_.vocab; ++c) {
          const int label = static_cast<int>(c);
          if (label == blank) continue;
          const double lp = row[c];
          if (lp < cfg_.prune_log_threshold) continue;

          const bool absorbed = label == delim && (key.empty() || last == delim);
          if (absorbed) {
            // Appending a delimiter here leaves the key unchanged.
            Prefix& s = slot(next, key, p);
            s.pnb = log_add(s.pnb, total + lp);
            continue;
          }
          if (label == last) {
            Prefix& s = slot(next, key, p);
            s.pnb = log_add(s.pnb, p.pnb + lp);
          }
          const double from = label == last ? p.pb : total;
          if (from == kNegInf) continue;
          std::vector<int> ext = key;
          ext.push_back(label);
          auto it = next.find(ext);
          if (it == next.end()) it = next.emplace(std::move(ext), extend(p, label)).first;
          it->second.pnb = log_add(it->second.pnb, from + lp);
        }
      }
      beam = prune(std::move(next));
    }
    return finish(beam);
  }

 private:
  using Map = std::unordered_map<std::vector<int>, Prefix, VecHash>;
  // Surviving prefixes in key order, so accumulation order never depends on hashing.
  using Beam = std::vector<std::pair<std::vector<int>, Prefix>>;

  // Entry for `key` in next, created with p's fusion state when absent.
  static Prefix& slot(Map& next, const std::vector<int>& key, const Prefix& p) {
    auto it = next.find(key);
    if (it == next.end()) {
      Prefix fresh = p;
      fresh.pb = fresh.pnb = kNegInf;
      it = next.emplace(key, std::move(fresh)).first;
    }
    return it->second;
  }

  Prefix extend(const Prefix& p, int label) const {
    Prefix q = p;
    q.pb = q.pnb = kNegInf;
    if (static_cast<std::size_t>(label) == vocab_.word_delimiter) {
      close_word(q);
    } else {
      q.partial += vocab_.tokens[static_cast<std::size_t>(label)];
    }
    return q;
  }

  void close_word(Prefix& q) const {
    if (q.partial.empty()) return;
    if (lm_) {
      const auto w = lm_->id(q.partial);
      q.lm += std::log(lm_->cond_prob_id(w, q.h2, q.h1));
      q.h2 = q.h1;
      q.h1 = w;
    }
    ++q.words;
    q.partial.clear();
  }

  double fused(const Prefix& p) const {
    return p.ctc() + cfg_.lm_weight * p.lm + cfg_.word_bonus * static_cast<double>(p.words);
  }

  Beam prune(Map next) const {
    Beam kept;
    kept.reserve(std::min(next.size(), cfg_.beam_width));
    if (next.size() <= cfg_.beam_width) {
      for (auto& [key, p] : next) kept.emplace_back(key, std::move(p));
    } else {
      select(next, kept);
    }
    std::sort(kept.begin(), kept.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return kept;
  }

  void select(Map& next, Beam& kept) const {
    std::vector<std::pair<double, const std::vector<int>*>> order;
    order.reserve(next.size());
    for (const auto& [key, p] : next) order.emplace_back(fused(p), &key);
    auto better = [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return *a.second < *b.second;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg_.beam_width),
                     order.end(), better);
    for (std::size_t i = 0; i < cfg_.beam_width; ++i) {
      auto node = next.extract(*order[i].second);
      kept.emplace_back(std::move(node.key()), std::move(node.mapped()));
    }
  }

  NBestList finish(const Beam& beam) const {
    struct Final {
      double ctc = kNegInf;
      double bonus = 0.0;  // alpha * lm + beta * words
    };
    std::map<std::string, Final> by_text;
    for (const auto& [key, p] : beam) {
      Prefix q = p;
      close_word(q);
      double lm_total = q.lm;
      if (lm_) lm_total += std::log(lm_->cond_prob_id(lm_->eos(), q.h2, q.h1));
      Final& f = by_text[render(key, vocab_)];
      f.ctc = log_add(f.ctc, p.ctc());
      f.bonus = cfg_.lm_weight * lm_total + cfg_.word_bonus * static_cast<double>(q.words);
    }
    std::vector<std::pair<std::string, double>> ranked;
    ranked.reserve(by_text.size());
    for (const auto& [text, f] : by_text)
      if (f.ctc != kNegInf) ranked.emplace_back(text, f.ctc + f.bonus);  // unreachable prefixes
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    NBestList out;
    out.utt_id = m_.utt_id;
    for (std::size_t i = 0; i < ranked.size() && i < cfg_.n_best; ++i)
      out.hypotheses.push_back({ranked[i].first, ranked[i].second, static_cast<int>(i) + 1});
    return out;
  }

  const LogitMatrix& m_;
  const Vocab& vocab_;
  const DecodeConfig& cfg_;
  const TrigramLM* lm_;
};

}  // namespace

NBestList ctc_beam_search(const LogitMatrix& m, const Vocab& vocab, const DecodeConfig& cfg,
                          const TrigramLM* lm) {
  validate(cfg);
  if (cfg.lm_weight > 0.0 && lm == nullptr)
    throw ConfigError("lm_weight > 0 requires a trigram model");
  if (m.vocab != vocab.size())
    throw DataError(m.utt_id + ": matrix has " + std::to_string(m.vocab) +
                    " classes but the vocabulary has " + std::to_string(vocab.size()));
  if (m.blank_index != vocab.blank_index)
    throw DataError(m.utt_id + ": blank index disagrees with the vocabulary");
  return BeamSearch(m, vocab, cfg, lm).run();
}

std::vector<std::pair<std::string, double>> ctc_brute_force(const LogitMatrix& m,
                                                            const Vocab& vocab, std::size_t n) {
  if (m.vocab != vocab.size()) throw DataError("matrix and vocabulary sizes differ");
  double paths = 1.0;
  for (std::size_t t = 0; t < m.frames; ++t) {
    paths *= static_cast<double>(m.vocab);
    if (paths > 1e7) throw std::invalid_argument("ctc_brute_force: V^T exceeds 1e7");
  }
  std::map<std::string, double> mass;
  std::vector<int> path(m.frames, 0);
  for (;;) {
    double lp = 0.0;
    for (std::size_t t = 0; t < m.frames; ++t) lp += m.at(t, static_cast<std::size_t>(path[t]));
    mass[collapse(path, vocab)] += std::exp(lp);
    std::size_t t = 0;
    while (t < m.frames && ++path[t] == static_cast<int>(m.vocab)) path[t++] = 0;
    if (t == m.frames) break;
  }
  std::vector<std::pair<std::string, double>> ranked;
  for (const auto& [text, p] : mass) ranked.emplace_back(text, std::log(p));
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

}  // namespace ger
