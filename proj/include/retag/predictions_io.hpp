#pragma once

// predictions.jsonl: one record per line,
//   {"doc_id": string, "labels": [string], "scores": [number]}
// with labels and scores aligned and ranked. Files produced elsewhere may
// omit "scores"; the reader canonicalizes (dedup + rank order) so metrics
// see clean set semantics either way.

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "retag/dataset.hpp"
#include "retag/errors.hpp"
#include "retag/types.hpp"

namespace retag {

inline void write_predictions(const std::string& path, const std::vector<PredictionSet>& preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  for (const auto& p : preds) {
    json obj;
    obj["doc_id"] = p.doc_id;
    std::vector<std::string> labels;
    std::vector<double> scores;
    labels.reserve(p.items.size());
    scores.reserve(p.items.size());
    for (const auto& item : p.items) {
      labels.push_back(item.label);
      scores.push_back(item.score);
    }
    obj["labels"] = labels;
    obj["scores"] = scores;
    out << obj.dump() << "\n";
  }
  if (!out) fail(Errc::IoError, "failed writing '" + path + "'");
}

inline std::vector<PredictionSet> read_predictions(const std::string& path) {
  std::vector<PredictionSet> preds;
  detail::for_each_jsonl_line(path, [&](std::size_t line_no, const json& obj) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object()) fail(Errc::MalformedLine, where + ": expected an object");
    PredictionSet p;
    p.doc_id = detail::require_string(obj, "doc_id", where);
    auto labels_it = obj.find("labels");
    if (labels_it == obj.end() || !labels_it->is_array())
      fail(Errc::MalformedLine, where + ": missing or non-array field \"labels\"");
    std::vector<double> scores;
    if (auto it = obj.find("scores"); it != obj.end() && !it->is_null()) {
      if (!it->is_array())
        fail(Errc::MalformedLine, where + ": \"scores\" must be an array");
      for (const auto& s : *it) {
        if (!s.is_number()) fail(Errc::MalformedLine, where + ": scores must be numbers");
        scores.push_back(s.get<double>());
      }
      if (scores.size() != labels_it->size())
        fail(Errc::MalformedLine, where + ": labels and scores have different lengths");
    }
    std::set<LabelId> seen;
    for (std::size_t i = 0; i < labels_it->size(); ++i) {
      const auto& l = (*labels_it)[i];
      if (!l.is_string()) fail(Errc::MalformedLine, where + ": labels must be strings");
      const LabelId label = l.get<std::string>();
      if (!seen.insert(label).second) continue;  // keep first occurrence
      p.items.push_back({label, scores.empty() ? 0.0 : scores[i]});
    }
    std::sort(p.items.begin(), p.items.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
      return ranked_before(a.score, a.label, b.score, b.label);
    });
    preds.push_back(std::move(p));
  });
  return preds;
}

}  // namespace retag
