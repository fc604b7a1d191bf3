#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retag/errors.hpp"
#include "retag/label_index.hpp"
#include "retag/types.hpp"
#include "retag/vector_math.hpp"

namespace retag {

enum class Strategy { LabelSimilarity, NeighborVote };

enum class OutputSizeRule { FixedK, ThresholdedScore };

enum class VoteWeighting { Similarity, Uniform };

struct AnnotatorConfig {
  Strategy strategy = Strategy::LabelSimilarity;
  int k = 5;                 // output size (FixedK) for label similarity
  int vote_neighbors = 10;   // training documents consulted per query
  OutputSizeRule rule = OutputSizeRule::FixedK;
  double threshold = 0.0;    // ThresholdedScore only
  VoteWeighting weighting = VoteWeighting::Similarity;
};

// Flat index over training-document embeddings plus the gold label set of
// each document. Same scan machinery as the label index; gold labels are
// validated against the taxonomy at build time, so anything voted out of
// this structure stays inside the closed label world.
class TrainingCorpusIndex {
 public:
  struct Row {
    std::string doc_id;
    EmbeddingVector vec;  // unit-norm
  };

  TrainingCorpusIndex() = default;

  static TrainingCorpusIndex build(const std::vector<DocumentRecord>& docs,
                                   const Taxonomy& taxonomy) {
    TrainingCorpusIndex corpus;
    for (const auto& doc : docs) {
      if (!doc.embedding)
        fail(Errc::MissingEmbedding, "training doc '" + doc.id + "' has no embedding");
      if (!doc.gold_labels)
        fail(Errc::NoGoldLabels, "training doc '" + doc.id + "' has no gold labels");
      for (const auto& l : *doc.gold_labels) {
        if (!taxonomy.contains(l))
          fail(Errc::GoldOutsideTaxonomy,
               "training doc '" + doc.id + "' has gold label '" + l + "' outside the taxonomy");
      }
      if (corpus.gold_.count(doc.id))
        fail(Errc::DuplicateDocId, "duplicate training doc id '" + doc.id + "'");
      if (!all_finite(*doc.embedding))
        fail(Errc::NonFiniteEntry, "training doc '" + doc.id + "' embedding is non-finite");
      if (corpus.dim_ != 0 && doc.embedding->dim() != corpus.dim_)
        fail(Errc::DimensionMismatch, "training doc '" + doc.id + "' has dimension " +
                                          std::to_string(doc.embedding->dim()) + ", expected " +
                                          std::to_string(corpus.dim_));
      Row row{doc.id, l2_normalize(*doc.embedding)};
      if (corpus.dim_ == 0) corpus.dim_ = doc.embedding->dim();
      corpus.gold_.emplace(doc.id, *doc.gold_labels);
      corpus.rows_.push_back(std::move(row));
    }
    return corpus;
  }

  struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
  };

  std::vector<ScoredDoc> nearest_docs(const EmbeddingVector& query, int n) const {
    if (n < 1) fail(Errc::InvalidK, "neighbor count must be >= 1, got " + std::to_string(n));
    if (rows_.empty()) fail(Errc::EmptyCorpus, "cannot search an empty training corpus");
    if (query.dim() != dim_)
      fail(Errc::DimensionMismatch, "query dimension " + std::to_string(query.dim()) +
                                        " does not match corpus dimension " +
                                        std::to_string(dim_));
    if (!all_finite(query)) fail(Errc::NonFiniteEntry, "query contains a non-finite entry");
    const EmbeddingVector unit_query = l2_normalize(query);
    auto scored = detail::top_k_scan(rows_, unit_query, static_cast<std::size_t>(n),
                                     [this](std::size_t i) -> const std::string& {
                                       return rows_[i].doc_id;
                                     });
    std::vector<ScoredDoc> out;
    out.reserve(scored.size());
    for (const auto& [score, i] : scored) out.push_back({rows_[i].doc_id, score});
    return out;
  }

  const std::set<LabelId>& gold_of(const std::string& doc_id) const {
    auto it = gold_.find(doc_id);
    if (it == gold_.end()) fail(Errc::UnknownDoc, "unknown training doc '" + doc_id + "'");
    return it->second;
  }

  const std::vector<Row>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  std::size_t dim() const { return dim_; }

 private:
  std::vector<Row> rows_;
  std::unordered_map<std::string, std::set<LabelId>> gold_;
  std::size_t dim_ = 0;
};

namespace detail {

inline std::vector<ScoredLabel> apply_output_rule(std::vector<ScoredLabel> ranked,
                                                  const AnnotatorConfig& config) {
  if (config.rule == OutputSizeRule::ThresholdedScore) {
    std::vector<ScoredLabel> kept;
    for (auto& item : ranked) {
      if (item.score >= config.threshold) kept.push_back(std::move(item));
    }
    return kept;
  }
  if (ranked.size() > static_cast<std::size_t>(config.k))
    ranked.resize(static_cast<std::size_t>(config.k));
  return ranked;
}

}  // namespace detail

// Predicts the k labels whose description embeddings are most similar to the
// document embedding. Output size is exactly min(k, K).
inline PredictionSet predict_label_similarity(const EmbeddingVector& doc_vec,
                                              const SemanticIndex& index, int k,
                                              std::string doc_id = {}) {
  PredictionSet prediction;
  prediction.doc_id = std::move(doc_id);
  prediction.items = index.search_top_k(doc_vec, k);
  return prediction;
}

// Retrieves the nearest training documents and accumulates their gold labels,
// each neighbor weighted by its cosine similarity (or uniformly). Scores are
// the accumulated weight divided by the number of consulted neighbors, which
// keeps them inside [-1, 1] without changing the ranking.
inline PredictionSet predict_neighbor_vote(const EmbeddingVector& doc_vec,
                                           const TrainingCorpusIndex& corpus,
                                           const AnnotatorConfig& config,
                                           std::string doc_id = {}) {
  if (config.vote_neighbors < 1)
    fail(Errc::InvalidK, "vote_neighbors must be >= 1, got " +
                             std::to_string(config.vote_neighbors));
  if (config.rule == OutputSizeRule::FixedK && config.k < 1)
    fail(Errc::InvalidK, "k must be >= 1, got " + std::to_string(config.k));
  const auto neighbors = corpus.nearest_docs(doc_vec, config.vote_neighbors);
  std::map<LabelId, double> weight;
  for (const auto& nb : neighbors) {
    const double w = config.weighting == VoteWeighting::Similarity ? nb.score : 1.0;
    for (const auto& label : corpus.gold_of(nb.doc_id)) weight[label] += w;
  }
  std::vector<ScoredLabel> ranked;
  ranked.reserve(weight.size());
  const double scale = static_cast<double>(neighbors.size());
  for (const auto& [label, w] : weight)
    ranked.push_back({label, std::clamp(w / scale, -1.0, 1.0)});
  std::sort(ranked.begin(), ranked.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    return ranked_before(a.score, a.label, b.score, b.label);
  });

  PredictionSet prediction;
  prediction.doc_id = std::move(doc_id);
  prediction.items = detail::apply_output_rule(std::move(ranked), config);
  return prediction;
}

// Strategy dispatch used by batch prediction, tuning and the service.
// For label similarity under ThresholdedScore the whole taxonomy is ranked
// before the threshold cut.
inline PredictionSet predict_one(const std::string& doc_id, const EmbeddingVector& doc_vec,
                                 const SemanticIndex* index, const TrainingCorpusIndex* corpus,
                                 const AnnotatorConfig& config) {
  if (config.strategy == Strategy::LabelSimilarity) {
    if (index == nullptr) fail(Errc::EmptyIndex, "label-similarity prediction needs an index");
    if (config.rule == OutputSizeRule::ThresholdedScore) {
      PredictionSet full =
          predict_label_similarity(doc_vec, *index, static_cast<int>(index->size()), doc_id);
      full.items = detail::apply_output_rule(std::move(full.items), config);
      return full;
    }
    if (config.k < 1) fail(Errc::InvalidK, "k must be >= 1, got " + std::to_string(config.k));
    return predict_label_similarity(doc_vec, *index, config.k, doc_id);
  }
  if (corpus == nullptr) fail(Errc::EmptyCorpus, "neighbor-vote prediction needs a training corpus");
  return predict_neighbor_vote(doc_vec, *corpus, config, doc_id);
}

struct BatchItemError {
  std::string doc_id;
  Errc code = Errc::IoError;
  std::string message;
};

struct BatchOptions {
  // Strict (default): the first failing document aborts the batch. Lenient:
  // failing documents are skipped and reported in `errors`.
  bool lenient = false;
};

struct BatchResult {
  std::vector<PredictionSet> predictions;  // input order
  std::vector<BatchItemError> errors;
};

inline BatchResult predict_batch(const std::vector<std::pair<std::string, EmbeddingVector>>& docs,
                                 const SemanticIndex* index, const TrainingCorpusIndex* corpus,
                                 const AnnotatorConfig& config, const BatchOptions& options = {}) {
  BatchResult result;
  result.predictions.reserve(docs.size());
  for (const auto& [doc_id, vec] : docs) {
    try {
      result.predictions.push_back(predict_one(doc_id, vec, index, corpus, config));
    } catch (const Error& e) {
      if (!options.lenient)
        fail(e.code(), "doc '" + doc_id + "': " + e.what());
      result.errors.push_back({doc_id, e.code(), e.what()});
    }
  }
  return result;
}

}  // namespace retag
