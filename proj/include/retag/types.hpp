#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retag/errors.hpp"

namespace retag {

// Labels are identified by an opaque, non-empty string that stays stable
// while the taxonomy evolves.
using LabelId = std::string;

// Dense embedding vector. Entries are stored as 32-bit floats (the on-disk
// width); all accumulation happens in 64-bit, see vector_math.hpp.
struct EmbeddingVector {
  std::vector<float> values;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<float> v) : values(std::move(v)) {}
  EmbeddingVector(std::initializer_list<float> init) : values(init) {}

  std::size_t dim() const { return values.size(); }
  bool empty() const { return values.empty(); }
  float operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.values == b.values;
  }
};

// One row of the label taxonomy: id, display name, and the textual
// description that stands in for the label in embedding space.
struct LabelEntry {
  LabelId id;
  std::string name;
  std::string description;
  std::optional<EmbeddingVector> embedding;
};

// The closed label universe. Ids are pairwise distinct; the version counter
// strictly increases on every mutation so index snapshots can be matched to
// the taxonomy state they were built from.
class Taxonomy {
 public:
  Taxonomy() = default;

  static Taxonomy restore(std::vector<LabelEntry> entries, std::uint64_t version) {
    Taxonomy t;
    for (auto& e : entries) t.add(std::move(e));
    t.version_ = version;
    return t;
  }

  void add(LabelEntry entry) {
    if (entry.id.empty()) fail(Errc::InvalidLabel, "label id must be non-empty");
    if (entry.description.empty())
      fail(Errc::EmptyDescription, "label '" + entry.id + "' has an empty description");
    if (by_id_.count(entry.id))
      fail(Errc::DuplicateLabel, "duplicate label id '" + entry.id + "'");
    by_id_.emplace(entry.id, entries_.size());
    entries_.push_back(std::move(entry));
    ++version_;
  }

  void remove(const LabelId& id) {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) fail(Errc::UnknownLabel, "unknown label id '" + id + "'");
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
    reindex();
    ++version_;
  }

  void update(LabelEntry entry) {
    auto it = by_id_.find(entry.id);
    if (it == by_id_.end()) fail(Errc::UnknownLabel, "unknown label id '" + entry.id + "'");
    if (entry.description.empty())
      fail(Errc::EmptyDescription, "label '" + entry.id + "' has an empty description");
    entries_[it->second] = std::move(entry);
    ++version_;
  }

  bool contains(const LabelId& id) const { return by_id_.count(id) != 0; }

  const LabelEntry* find(const LabelId& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }

  const std::vector<LabelEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t version() const { return version_; }

 private:
  void reindex() {
    by_id_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i) by_id_.emplace(entries_[i].id, i);
  }

  std::vector<LabelEntry> entries_;
  std::unordered_map<LabelId, std::size_t> by_id_;
  std::uint64_t version_ = 0;
};

// A document with optional gold labels and an optional precomputed embedding.
struct DocumentRecord {
  std::string id;
  std::string text;
  std::optional<std::set<LabelId>> gold_labels;
  std::optional<EmbeddingVector> embedding;
};

// A label with its similarity score, finite and in [-1, 1].
struct ScoredLabel {
  LabelId label;
  double score = 0.0;

  friend bool operator==(const ScoredLabel& a, const ScoredLabel& b) {
    return a.label == b.label && a.score == b.score;
  }
};

// Ranked prediction for one document. Items are sorted by score descending,
// ties by ascending label id; labels are pairwise distinct and always drawn
// from the taxonomy the prediction was made against.
struct PredictionSet {
  std::string doc_id;
  std::vector<ScoredLabel> items;

  std::set<LabelId> label_set() const {
    std::set<LabelId> out;
    for (const auto& it : items) out.insert(it.label);
    return out;
  }
};

// Canonical ranking order used across the whole engine: score descending,
// ties broken by ascending id. Keeps runs bit-reproducible.
inline bool ranked_before(double score_a, const std::string& id_a, double score_b,
                          const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

}  // namespace retag
