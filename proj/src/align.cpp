#include "ger/align.hpp"

#include <algorithm>
#include <stdexcept>

#include "ger/data_model.hpp"
#include "ger/error.hpp"

namespace ger {

std::size_t Alignment::cost() const {
  return static_cast<std::size_t>(std::count_if(
      ops.begin(), ops.end(), [](const AlignedPair& p) { return p.op != EditOp::match; }));
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  n_ref += o.n_ref;
  sub += o.sub;
  del += o.del;
  ins += o.ins;
  match += o.match;
  return *this;
}

Alignment align(std::span<const Token> ref, std::span<const Token> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  const std::size_t w = m + 1;
  // suffix[i][j] scores ref[i..] against hyp[j..] as cost * unit + gap ops, so
  // that among minimum-cost paths the one with fewest insertions and deletions
  // wins. That keeps the S/D/I split the same when ref and hyp swap roles.
  const std::size_t unit = n + m + 1;
  const std::size_t gap = unit + 1;
  std::vector<std::size_t> suffix((n + 1) * w);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return suffix[i * w + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, m) = (n - i) * gap;
  for (std::size_t j = 0; j <= m; ++j) at(n, j) = (m - j) * gap;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      std::size_t diag = at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : unit);
      at(i, j) = std::min({diag, at(i + 1, j) + gap, at(i, j + 1) + gap});
    }
  }

  // Walk forward from the start: diagonal, then deletion, then insertion.
  Alignment a;
  a.ops.reserve(std::max(n, m));
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const std::size_t here = at(i, j);
    if (i < n && j < m) {
      const bool same = ref[i] == hyp[j];
      if (at(i + 1, j + 1) + (same ? 0 : unit) == here) {
        a.ops.push_back({same ? EditOp::match : EditOp::sub, i, j});
        ++i, ++j;
        continue;
      }
    }
    if (i < n && at(i + 1, j) + gap == here) {
      a.ops.push_back({EditOp::del, i, std::nullopt});
      ++i;
      continue;
    }
    a.ops.push_back({EditOp::ins, std::nullopt, j});
    ++j;
  }
  return a;
}

std::size_t edit_distance(std::span<const Token> ref, std::span<const Token> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1), prev[j] + 1,
                         cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

EditCounts wer_counts(const Alignment& a, std::size_t n_ref) {
  EditCounts c;
  c.n_ref = n_ref;
  for (const auto& p : a.ops) {
    switch (p.op) {
      case EditOp::match: ++c.match; break;
      case EditOp::sub: ++c.sub; break;
      case EditOp::del: ++c.del; break;
      case EditOp::ins: ++c.ins; break;
    }
  }
  if (c.match + c.sub + c.del != n_ref)
    throw std::invalid_argument("alignment covers " + std::to_string(c.match + c.sub + c.del) +
                                " reference tokens, expected " + std::to_string(n_ref));
  return c;
}

EditCounts score(std::span<const Token> ref, std::span<const Token> hyp) {
  return wer_counts(align(ref, hyp), ref.size());
}

std::optional<double> utterance_wer(const EditCounts& c) {
  if (c.n_ref == 0) return std::nullopt;
  return 100.0 * static_cast<double>(c.errors()) / static_cast<double>(c.n_ref);
}

CorpusWer corpus_wer(std::span<const EditCounts> counts) {
  CorpusWer w;
  w.utterances = counts.size();
  for (const auto& c : counts) {
    if (c.n_ref == 0) {
      ++w.empty_references;
      continue;
    }
    w.errors += c.errors();
    w.ref_tokens += c.n_ref;
    w.sub += c.sub;
    w.del += c.del;
    w.ins += c.ins;
  }
  if (w.ref_tokens == 0) throw DataError("corpus WER undefined: every reference is empty");
  w.percent = 100.0 * static_cast<double>(w.errors) / static_cast<double>(w.ref_tokens);
  return w;
}

OracleChoice oracle_select(std::span<const Token> ref, const NBestList& nbest,
                           const NormConfig& cfg) {
  if (nbest.hypotheses.empty()) throw std::invalid_argument("oracle_select: empty N-best list");
  OracleChoice best;
  bool have = false;
  for (std::size_t k = 0; k < nbest.hypotheses.size(); ++k) {
    Tokens hyp = tokenize(nbest.hypotheses[k].text, cfg);
    EditCounts c = score(ref, hyp);
    if (!have || c.errors() < best.counts.errors()) {
      best.index = static_cast<int>(k) + 1;
      best.counts = c;
      have = true;
    }
  }
  return best;
}

}  // namespace ger
