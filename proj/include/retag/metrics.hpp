#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "retag/errors.hpp"
#include "retag/types.hpp"

namespace retag {

// Per-label true positive / false positive / false negative counters over
// set semantics of predicted vs. gold label sets.
struct LabelCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

struct LabelConfusion {
  std::map<LabelId, LabelCounts> per_label;
  std::size_t n_docs = 0;
};

// Which labels enter the macro average. GoldSupported (default): labels with
// at least one gold occurrence in the split. FullTaxonomy: every taxonomy
// label, labels never seen scoring zero.
enum class MacroUniverse { GoldSupported, FullTaxonomy };

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PerLabelScore {
  LabelId label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct EvalReport {
  double micro_p = 0.0, micro_r = 0.0, micro_f1 = 0.0;
  double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
  std::size_t n_docs = 0;
  std::vector<PerLabelScore> per_label;
};

namespace detail {

// Zero-division convention: any score with a zero denominator is 0.
inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline PRF prf(double tp, double fp, double fn) {
  PRF out;
  out.precision = safe_div(tp, tp + fp);
  out.recall = safe_div(tp, tp + fn);
  out.f1 = safe_div(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

}  // namespace detail

// Documents present in `gold` but missing from `preds` count as empty
// predictions (false negatives only). Every predicted document must exist in
// `gold` and carry gold labels.
inline LabelConfusion confusion_counts(const std::vector<PredictionSet>& preds,
                                       const std::vector<DocumentRecord>& gold,
                                       const Taxonomy& taxonomy) {
  std::unordered_map<std::string, const DocumentRecord*> gold_by_id;
  gold_by_id.reserve(gold.size());
  for (const auto& d : gold) gold_by_id.emplace(d.id, &d);

  LabelConfusion confusion;
  confusion.n_docs = gold.size();

  std::unordered_map<std::string, const PredictionSet*> pred_by_id;
  pred_by_id.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = gold_by_id.find(p.doc_id);
    if (it == gold_by_id.end())
      fail(Errc::UnknownDoc, "prediction for unknown doc '" + p.doc_id + "'");
    if (!it->second->gold_labels)
      fail(Errc::MissingGold, "doc '" + p.doc_id + "' has no gold labels");
    pred_by_id.emplace(p.doc_id, &p);
  }

  for (const auto& d : gold) {
    if (!d.gold_labels) fail(Errc::MissingGold, "doc '" + d.id + "' has no gold labels");
    for (const auto& l : *d.gold_labels) {
      if (!taxonomy.contains(l))
        fail(Errc::GoldOutsideTaxonomy,
             "doc '" + d.id + "' has gold label '" + l + "' outside the taxonomy");
    }
    std::set<LabelId> predicted;
    if (auto it = pred_by_id.find(d.id); it != pred_by_id.end())
      predicted = it->second->label_set();
    for (const auto& l : predicted) {
      if (!taxonomy.contains(l))
        fail(Errc::LabelOutsideTaxonomy,
             "doc '" + d.id + "' predicts label '" + l + "' outside the taxonomy");
      if (d.gold_labels->count(l))
        ++confusion.per_label[l].tp;
      else
        ++confusion.per_label[l].fp;
    }
    for (const auto& l : *d.gold_labels) {
      if (!predicted.count(l)) ++confusion.per_label[l].fn;
    }
  }
  return confusion;
}

// Pools counts over all labels before computing precision/recall.
inline PRF micro_scores(const LabelConfusion& confusion) {
  double tp = 0, fp = 0, fn = 0;
  for (const auto& [label, c] : confusion.per_label) {
    tp += static_cast<double>(c.tp);
    fp += static_cast<double>(c.fp);
    fn += static_cast<double>(c.fn);
  }
  return detail::prf(tp, fp, fn);
}

inline double micro_f1(const LabelConfusion& confusion) { return micro_scores(confusion).f1; }

// Unweighted mean of per-label scores over the chosen universe.
inline PRF macro_scores(const LabelConfusion& confusion, const Taxonomy& taxonomy,
                        MacroUniverse universe = MacroUniverse::GoldSupported) {
  double sum_p = 0, sum_r = 0, sum_f1 = 0;
  std::size_t n = 0;
  auto accumulate = [&](const LabelCounts& c) {
    const PRF s = detail::prf(static_cast<double>(c.tp), static_cast<double>(c.fp),
                              static_cast<double>(c.fn));
    sum_p += s.precision;
    sum_r += s.recall;
    sum_f1 += s.f1;
    ++n;
  };
  if (universe == MacroUniverse::FullTaxonomy) {
    for (const auto& entry : taxonomy.entries()) {
      auto it = confusion.per_label.find(entry.id);
      accumulate(it == confusion.per_label.end() ? LabelCounts{} : it->second);
    }
  } else {
    for (const auto& [label, c] : confusion.per_label) {
      if (c.tp + c.fn > 0) accumulate(c);  // gold support only
    }
  }
  if (n == 0) return {};
  return {sum_p / static_cast<double>(n), sum_r / static_cast<double>(n),
          sum_f1 / static_cast<double>(n)};
}

inline double macro_f1(const LabelConfusion& confusion, const Taxonomy& taxonomy,
                       MacroUniverse universe = MacroUniverse::GoldSupported) {
  return macro_scores(confusion, taxonomy, universe).f1;
}

inline EvalReport evaluate(const std::vector<PredictionSet>& preds,
                           const std::vector<DocumentRecord>& gold, const Taxonomy& taxonomy,
                           MacroUniverse universe = MacroUniverse::GoldSupported) {
  const LabelConfusion confusion = confusion_counts(preds, gold, taxonomy);
  EvalReport report;
  const PRF micro = micro_scores(confusion);
  report.micro_p = micro.precision;
  report.micro_r = micro.recall;
  report.micro_f1 = micro.f1;
  const PRF macro = macro_scores(confusion, taxonomy, universe);
  report.macro_p = macro.precision;
  report.macro_r = macro.recall;
  report.macro_f1 = macro.f1;
  report.n_docs = confusion.n_docs;
  for (const auto& [label, c] : confusion.per_label) {
    const PRF s = detail::prf(static_cast<double>(c.tp), static_cast<double>(c.fp),
                              static_cast<double>(c.fn));
    report.per_label.push_back({label, s.precision, s.recall, s.f1, c.tp + c.fn});
  }
  return report;
}

}  // namespace retag
