#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "retag/annotator.hpp"
#include "retag/errors.hpp"
#include "retag/label_index.hpp"
#include "retag/metrics.hpp"
#include "retag/types.hpp"

namespace retag {

enum class Objective { MicroF1, MacroF1 };

inline const char* objective_name(Objective o) {
  return o == Objective::MicroF1 ? "micro-f1" : "macro-f1";
}

struct TuningSpec {
  std::vector<int> k_grid;               // non-empty, >= 1, strictly increasing
  Objective objective = Objective::MicroF1;
  AnnotatorConfig base;                  // strategy + fixed knobs
  MacroUniverse macro_universe = MacroUniverse::GoldSupported;
};

inline std::vector<int> default_k_grid() {
  std::vector<int> grid(20);
  for (int i = 0; i < 20; ++i) grid[i] = i + 1;
  return grid;
}

struct KScore {
  int k = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct TuningReport {
  int best_k = 0;
  std::vector<KScore> per_k;
  Objective objective_used = Objective::MicroF1;

  double objective_at(int k) const {
    for (const auto& s : per_k) {
      if (s.k == k) return objective_used == Objective::MicroF1 ? s.micro_f1 : s.macro_f1;
    }
    fail(Errc::InvalidK, "k " + std::to_string(k) + " not in the tuning report");
  }
};

namespace detail {

inline void validate_k_grid(const std::vector<int>& grid) {
  if (grid.empty()) fail(Errc::InvalidK, "k grid must be non-empty");
  int prev = 0;
  for (int k : grid) {
    if (k < 1) fail(Errc::InvalidK, "k grid entries must be >= 1, got " + std::to_string(k));
    if (k <= prev) fail(Errc::InvalidK, "k grid must be strictly increasing");
    prev = k;
  }
}

// The grid knob is the strategy's k: output size for label similarity,
// consulted-neighbor count for neighbor voting.
inline AnnotatorConfig config_at_k(const AnnotatorConfig& base, int k) {
  AnnotatorConfig c = base;
  if (base.strategy == Strategy::LabelSimilarity)
    c.k = k;
  else
    c.vote_neighbors = k;
  return c;
}

}  // namespace detail

// Full grid sweep over k, scoring the annotator on the validation split.
// No model state is touched: the index and embeddings pass through const.
// Ties on the objective resolve to the smallest k.
inline TuningReport tune_k(const std::vector<DocumentRecord>& val_docs,
                           const SemanticIndex& index, const TrainingCorpusIndex* corpus,
                           const TuningSpec& spec, const Taxonomy& taxonomy) {
  detail::validate_k_grid(spec.k_grid);
  if (val_docs.empty()) fail(Errc::EmptyValidationSet, "validation set is empty");

  std::vector<std::pair<std::string, EmbeddingVector>> queries;
  queries.reserve(val_docs.size());
  for (const auto& doc : val_docs) {
    if (!doc.gold_labels)
      fail(Errc::NoGoldLabels, "validation doc '" + doc.id + "' has no gold labels");
    for (const auto& l : *doc.gold_labels) {
      if (!taxonomy.contains(l))
        fail(Errc::GoldOutsideTaxonomy,
             "validation doc '" + doc.id + "' has gold label '" + l + "' outside the taxonomy");
    }
    if (!doc.embedding)
      fail(Errc::MissingEmbedding, "validation doc '" + doc.id + "' has no embedding");
    queries.emplace_back(doc.id, *doc.embedding);
  }

  TuningReport report;
  report.objective_used = spec.objective;
  double best_score = -1.0;
  for (int k : spec.k_grid) {
    const AnnotatorConfig config = detail::config_at_k(spec.base, k);
    const BatchResult batch = predict_batch(queries, &index, corpus, config);
    const EvalReport eval = evaluate(batch.predictions, val_docs, taxonomy, spec.macro_universe);
    report.per_k.push_back({k, eval.micro_f1, eval.macro_f1});
    const double score = spec.objective == Objective::MicroF1 ? eval.micro_f1 : eval.macro_f1;
    if (score > best_score) {
      best_score = score;
      report.best_k = k;
    }
  }
  return report;
}

}  // namespace retag
