#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "retag/annotator.hpp"
#include "retag/dataset.hpp"
#include "retag/errors.hpp"
#include "retag/label_index.hpp"
#include "retag/metrics.hpp"
#include "retag/tuner.hpp"
#include "retag/types.hpp"

namespace retag {

// Data-scaling experiment: for each training-set size N, subsample the
// training pool (samples nest across N), retune k on the fixed validation
// split, and score the test split. Label-similarity ignores the training
// pool entirely, so its curve is flat by construction and serves as the
// reference line.
struct ScalingSpec {
  std::vector<std::size_t> sizes;
  std::uint64_t seed = 0;
  AnnotatorConfig base;
  Objective objective = Objective::MicroF1;
  std::vector<int> k_grid = default_k_grid();
  MacroUniverse macro_universe = MacroUniverse::GoldSupported;
};

struct ScalingPoint {
  std::size_t n_train = 0;
  int best_k = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct ScalingReport {
  Strategy strategy = Strategy::NeighborVote;
  std::vector<ScalingPoint> points;
};

inline ScalingReport run_scaling(const std::vector<DocumentRecord>& train_pool,
                                 const std::vector<DocumentRecord>& val_docs,
                                 const std::vector<DocumentRecord>& test_docs,
                                 const Taxonomy& taxonomy, const SemanticIndex& label_index,
                                 const ScalingSpec& spec) {
  if (spec.sizes.empty()) fail(Errc::InvalidSplit, "no training sizes given");
  if (test_docs.empty()) fail(Errc::EmptyValidationSet, "test split is empty");

  SplitSpec subsample_spec;
  subsample_spec.seed = spec.seed;

  std::vector<std::pair<std::string, EmbeddingVector>> test_queries;
  test_queries.reserve(test_docs.size());
  for (const auto& doc : test_docs) {
    if (!doc.embedding)
      fail(Errc::MissingEmbedding, "test doc '" + doc.id + "' has no embedding");
    test_queries.emplace_back(doc.id, *doc.embedding);
  }

  ScalingReport report;
  report.strategy = spec.base.strategy;
  for (std::size_t n : spec.sizes) {
    const auto sample = subsample_train(train_pool, subsample_spec, n);

    TuningSpec tuning;
    tuning.k_grid = spec.k_grid;
    tuning.objective = spec.objective;
    tuning.base = spec.base;
    tuning.macro_universe = spec.macro_universe;

    ScalingPoint point;
    point.n_train = n;
    if (spec.base.strategy == Strategy::NeighborVote) {
      const auto corpus = TrainingCorpusIndex::build(sample, taxonomy);
      // Neighbor grids larger than the sample are meaningless; clip.
      std::vector<int> grid;
      for (int k : tuning.k_grid) {
        if (static_cast<std::size_t>(k) <= corpus.size()) grid.push_back(k);
      }
      if (grid.empty()) grid.push_back(1);
      tuning.k_grid = grid;
      const TuningReport tuned = tune_k(val_docs, label_index, &corpus, tuning, taxonomy);
      AnnotatorConfig config = spec.base;
      config.vote_neighbors = tuned.best_k;
      const BatchResult batch = predict_batch(test_queries, &label_index, &corpus, config);
      const EvalReport eval =
          evaluate(batch.predictions, test_docs, taxonomy, spec.macro_universe);
      point.best_k = tuned.best_k;
      point.micro_f1 = eval.micro_f1;
      point.macro_f1 = eval.macro_f1;
    } else {
      const TuningReport tuned = tune_k(val_docs, label_index, nullptr, tuning, taxonomy);
      AnnotatorConfig config = spec.base;
      config.k = tuned.best_k;
      const BatchResult batch = predict_batch(test_queries, &label_index, nullptr, config);
      const EvalReport eval =
          evaluate(batch.predictions, test_docs, taxonomy, spec.macro_universe);
      point.best_k = tuned.best_k;
      point.micro_f1 = eval.micro_f1;
      point.macro_f1 = eval.macro_f1;
    }
    report.points.push_back(point);
  }
  return report;
}

}  // namespace retag
