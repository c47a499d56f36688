#include "ger/analysis.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>

namespace ger {

std::string to_string(Category c) {
  switch (c) {
    case Category::improved: return "improved";
    case Category::degraded: return "degraded";
    case Category::unchanged: return "unchanged";
  }
  return "?";
}

std::string to_string(ErrorType t) {
  switch (t) {
    case ErrorType::S: return "S";
    case ErrorType::D: return "D";
    case ErrorType::I: return "I";
  }
  return "?";
}

SentenceCategory categorize_sentence(const EditCounts& base, const EditCounts& corr,
                                     std::string utt_id) {
  if (base.n_ref != corr.n_ref)
    throw std::invalid_argument("categorize_sentence: counts are against different references");
  SentenceCategory s;
  s.utt_id = std::move(utt_id);
  s.base_errors = base.errors();
  s.corr_errors = corr.errors();
  if (s.corr_errors < s.base_errors)
    s.category = Category::improved;
  else if (s.corr_errors > s.base_errors)
    s.category = Category::degraded;
  else
    s.category = Category::unchanged;
  return s;
}

std::vector<AnchoredError> extract_anchored_errors(const Alignment& a, std::span<const Token> hyp) {
  std::vector<AnchoredError> out;
  std::size_t consumed = 0;  // reference tokens passed so far
  for (const auto& p : a.ops) {
    switch (p.op) {
      case EditOp::match:
        ++consumed;
        break;
      case EditOp::sub:
        out.push_back({ErrorType::S, *p.ref_index, hyp[*p.hyp_index]});
        ++consumed;
        break;
      case EditOp::del:
        out.push_back({ErrorType::D, *p.ref_index, {}});
        ++consumed;
        break;
      case EditOp::ins:
        out.push_back({ErrorType::I, consumed, hyp[*p.hyp_index]});
        break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

TypeCounts& TypeCounts::operator+=(const TypeCounts& o) {
  tp += o.tp;
  fn += o.fn;
  fp += o.fp;
  return *this;
}

TypeCounts EditAnalysis::total() const {
  TypeCounts t;
  for (const auto& c : by_type) t += c;
  return t;
}

EditAnalysis& EditAnalysis::operator+=(const EditAnalysis& o) {
  for (std::size_t i = 0; i < by_type.size(); ++i) by_type[i] += o.by_type[i];
  return *this;
}

EditAnalysis edit_level_analysis(std::span<const Token> ref, std::span<const Token> baseline,
                                 std::span<const Token> corrected) {
  const auto base = extract_anchored_errors(align(ref, baseline), baseline);
  const auto corr = extract_anchored_errors(align(ref, corrected), corrected);
  // The type is part of the ordering key, so the sorted intersection only
  // pairs errors of the same type.
  std::vector<AnchoredError> persisting;
  std::set_intersection(base.begin(), base.end(), corr.begin(), corr.end(),
                        std::back_inserter(persisting));

  EditAnalysis ea;
  for (const auto& e : base) ++ea[e.type].tp;
  for (const auto& e : corr) ++ea[e.type].fp;
  for (const auto& e : persisting) {
    auto& c = ea[e.type];
    ++c.fn;
    --c.tp;
    --c.fp;
  }
  return ea;
}

PrecisionRecall precision_recall(const TypeCounts& c) {
  PrecisionRecall pr;
  if (c.tp + c.fp > 0)
    pr.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    pr.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return pr;
}

EditReport precision_recall(const EditAnalysis& ea) {
  EditReport r;
  for (std::size_t i = 0; i < ea.by_type.size(); ++i) r.by_type[i] = precision_recall(ea.by_type[i]);
  r.total = precision_recall(ea.total());
  return r;
}

CategoryShares share_categories(std::span<const SentenceCategory> cats) {
  CategoryShares s;
  for (const auto& c : cats) {
    switch (c.category) {
      case Category::improved: ++s.improved; break;
      case Category::degraded: ++s.degraded; break;
      case Category::unchanged: ++s.unchanged; break;
    }
  }
  if (const auto n = static_cast<double>(s.total()); n > 0) {
    s.improved_pct = 100.0 * static_cast<double>(s.improved) / n;
    s.degraded_pct = 100.0 * static_cast<double>(s.degraded) / n;
    s.unchanged_pct = 100.0 * static_cast<double>(s.unchanged) / n;
  }
  return s;
}

ExperimentSummary aggregate(std::string system, std::span<const SentenceCategory> categories,
                            std::span<const EditAnalysis> analyses, const CorpusWer& wer) {
  if (categories.empty()) throw std::invalid_argument("aggregate: no utterances");
  if (categories.size() != analyses.size())
    throw std::invalid_argument("aggregate: categories and analyses cover different utterances");
  ExperimentSummary s;
  s.system = std::move(system);
  s.wer = wer;
  s.categories = share_categories(categories);
  for (const auto& a : analyses) s.edits += a;
  s.edit_metrics = precision_recall(s.edits);
  return s;
}

}  // namespace ger
