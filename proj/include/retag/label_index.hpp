#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retag/errors.hpp"
#include "retag/types.hpp"
#include "retag/vector_math.hpp"

namespace retag {

namespace detail {

// Exact brute-force top-k over unit-norm rows. Scores every row (dot product
// against a unit query), keeps the k best under (score desc, id asc).
// Selection via nth_element keeps the scan O(K + k log k).
template <typename Rows, typename IdOf>
std::vector<std::pair<double, std::size_t>> top_k_scan(const Rows& rows,
                                                       const EmbeddingVector& unit_query,
                                                       std::size_t k, IdOf id_of) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double s = std::clamp(dot(rows[i].vec, unit_query), -1.0, 1.0);
    scored.emplace_back(s, i);
  }
  auto before = [&](const auto& a, const auto& b) {
    return ranked_before(a.first, id_of(a.second), b.first, id_of(b.second));
  };
  const std::size_t kk = std::min(k, scored.size());
  if (kk < scored.size()) {
    std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(kk),
                     scored.end(), before);
    scored.resize(kk);
  }
  std::sort(scored.begin(), scored.end(), before);
  return scored;
}

}  // namespace detail

struct IndexStats {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::uint64_t version = 0;
};

// Exact cosine top-k index over label embeddings. Rows hold unit-norm
// vectors so a search is one normalization of the query plus K dot products.
// An empty index is constructible (bootstrap-then-populate flows) but
// refuses to search.
class SemanticIndex {
 public:
  struct Row {
    LabelId id;
    EmbeddingVector vec;  // unit-norm
  };

  SemanticIndex() = default;

  // One normalized row per taxonomy entry; all embeddings must be present,
  // finite, nonzero and of a common dimension.
  static SemanticIndex build(const Taxonomy& taxonomy) {
    if (taxonomy.empty()) fail(Errc::EmptyTaxonomy, "cannot build an index from an empty taxonomy");
    SemanticIndex index;
    for (const auto& entry : taxonomy.entries()) {
      if (!entry.embedding)
        fail(Errc::MissingEmbedding, "label '" + entry.id + "' has no embedding");
      index.append_row(entry.id, *entry.embedding);
    }
    index.version_ = taxonomy.version();
    return index;
  }

  // Restores persisted rows without renormalizing them; byte-stable across
  // save/load cycles. Rows must already be unit-norm.
  static SemanticIndex restore(std::vector<Row> rows, std::size_t dim, std::uint64_t version) {
    SemanticIndex index;
    index.dim_ = dim;
    index.version_ = version;
    for (auto& row : rows) {
      if (row.vec.dim() != dim)
        fail(Errc::DimensionMismatch, "row '" + row.id + "' has dimension " +
                                          std::to_string(row.vec.dim()) + ", expected " +
                                          std::to_string(dim));
      if (!is_unit_norm(row.vec))
        fail(Errc::ZeroVector, "row '" + row.id + "' is not unit-norm");
      if (index.by_id_.count(row.id))
        fail(Errc::DuplicateLabel, "duplicate row id '" + row.id + "'");
      index.by_id_.emplace(row.id, index.rows_.size());
      index.rows_.push_back(std::move(row));
    }
    return index;
  }

  // O(1) in embedding work: normalizes the one new vector, touches no
  // existing row.
  void add(const LabelEntry& entry) {
    if (!entry.embedding)
      fail(Errc::MissingEmbedding, "label '" + entry.id + "' has no embedding");
    if (by_id_.count(entry.id)) fail(Errc::DuplicateLabel, "duplicate label id '" + entry.id + "'");
    append_row(entry.id, *entry.embedding);
    ++version_;
  }

  void remove(const LabelId& id) {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) fail(Errc::UnknownLabel, "unknown label id '" + id + "'");
    rows_.erase(rows_.begin() + static_cast<std::ptrdiff_t>(it->second));
    by_id_.clear();
    for (std::size_t i = 0; i < rows_.size(); ++i) by_id_.emplace(rows_[i].id, i);
    ++version_;
  }

  std::vector<ScoredLabel> search_top_k(const EmbeddingVector& query, int k) const {
    if (k < 1) fail(Errc::InvalidK, "k must be >= 1, got " + std::to_string(k));
    if (rows_.empty()) fail(Errc::EmptyIndex, "cannot search an empty index");
    if (query.dim() != dim_)
      fail(Errc::DimensionMismatch, "query dimension " + std::to_string(query.dim()) +
                                        " does not match index dimension " +
                                        std::to_string(dim_));
    if (!all_finite(query)) fail(Errc::NonFiniteEntry, "query contains a non-finite entry");
    const EmbeddingVector unit_query = l2_normalize(query);
    auto scored = detail::top_k_scan(rows_, unit_query, static_cast<std::size_t>(k),
                                     [this](std::size_t i) -> const std::string& {
                                       return rows_[i].id;
                                     });
    std::vector<ScoredLabel> out;
    out.reserve(scored.size());
    for (const auto& [score, i] : scored) out.push_back({rows_[i].id, score});
    return out;
  }

  IndexStats stats() const { return {rows_.size(), dim_, version_}; }

  const std::vector<Row>& rows() const { return rows_; }
  bool contains(const LabelId& id) const { return by_id_.count(id) != 0; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  std::size_t dim() const { return dim_; }
  std::uint64_t version() const { return version_; }

 private:
  void append_row(const LabelId& id, const EmbeddingVector& embedding) {
    if (!all_finite(embedding))
      fail(Errc::NonFiniteEntry, "label '" + id + "' embedding contains a non-finite entry");
    if (dim_ != 0 && embedding.dim() != dim_)
      fail(Errc::DimensionMismatch, "label '" + id + "' has dimension " +
                                        std::to_string(embedding.dim()) + ", expected " +
                                        std::to_string(dim_));
    Row row{id, l2_normalize(embedding)};  // throws before any state changes
    if (dim_ == 0) dim_ = embedding.dim();
    by_id_.emplace(id, rows_.size());
    rows_.push_back(std::move(row));
  }

  std::vector<Row> rows_;
  std::unordered_map<LabelId, std::size_t> by_id_;
  std::size_t dim_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace retag
