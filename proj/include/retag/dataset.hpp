#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "retag/errors.hpp"
#include "retag/types.hpp"

namespace retag {

using json = nlohmann::json;

namespace detail {

// Streams a JSONL file, calling fn(line_number, parsed) per non-blank line.
// Line numbers are 1-based.
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "' for reading");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded())
      fail(Errc::MalformedLine, path + ":" + std::to_string(line_no) + ": invalid JSON");
    fn(line_no, parsed);
  }
}

inline std::string require_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    fail(Errc::MalformedLine, where + ": missing or non-string field \"" + key + "\"");
  return it->get<std::string>();
}

// Deterministic Fisher-Yates with an explicit modulo draw so the order is
// identical across standard libraries and platforms.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace detail

// Expects JSONL lines {"id": ..., "name": ..., "description": ...}.
inline Taxonomy load_taxonomy(const std::string& path) {
  Taxonomy taxonomy;
  detail::for_each_jsonl_line(path, [&](std::size_t line_no, const json& obj) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object()) fail(Errc::MalformedLine, where + ": expected an object");
    LabelEntry entry;
    entry.id = detail::require_string(obj, "id", where);
    entry.name = obj.value("name", entry.id);
    entry.description = detail::require_string(obj, "description", where);
    taxonomy.add(std::move(entry));
  });
  return taxonomy;
}

inline void write_taxonomy(const std::string& path, const Taxonomy& taxonomy) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  for (const auto& e : taxonomy.entries()) {
    json obj{{"id", e.id}, {"name", e.name}, {"description", e.description}};
    out << obj.dump() << "\n";
  }
  if (!out) fail(Errc::IoError, "failed writing '" + path + "'");
}

struct LoadIssue {
  std::size_t line = 0;
  std::string doc_id;
  std::string message;
};

struct LoadOptions {
  // Strict (default): the first bad line/document aborts the load. Lenient:
  // bad records are dropped and reported through `issues`.
  bool lenient = false;
};

// Expects JSONL lines {"id": ..., "text": ..., "labels": [...]} where
// "labels" is optional. Gold labels are validated against the taxonomy.
inline std::vector<DocumentRecord> load_documents(const std::string& path,
                                                  const Taxonomy& taxonomy,
                                                  const LoadOptions& options = {},
                                                  std::vector<LoadIssue>* issues = nullptr) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "' for reading");
  std::vector<DocumentRecord> docs;
  std::set<std::string> seen_ids;
  auto report = [&](std::size_t line, const std::string& doc_id, Errc code,
                    const std::string& message) {
    if (!options.lenient) fail(code, message);
    if (issues) issues->push_back({line, doc_id, message});
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      report(line_no, "", Errc::MalformedLine, where + ": invalid JSON");
      continue;
    }
    DocumentRecord doc;
    if (auto it = obj.find("id"); it != obj.end() && it->is_string()) {
      doc.id = it->get<std::string>();
    } else {
      report(line_no, "", Errc::MalformedLine, where + ": missing or non-string field \"id\"");
      continue;
    }
    doc.text = obj.value("text", std::string{});
    if (doc.id.empty()) {
      report(line_no, "", Errc::MalformedLine, where + ": empty document id");
      continue;
    }
    if (!seen_ids.insert(doc.id).second) {
      report(line_no, doc.id, Errc::DuplicateDocId, where + ": duplicate doc id '" + doc.id + "'");
      continue;
    }
    bool bad = false;
    if (auto it = obj.find("labels"); it != obj.end() && !it->is_null()) {
      if (!it->is_array()) {
        report(line_no, doc.id, Errc::MalformedLine, where + ": \"labels\" must be an array");
        continue;
      }
      std::set<LabelId> gold;
      for (const auto& l : *it) {
        if (!l.is_string()) {
          report(line_no, doc.id, Errc::MalformedLine, where + ": labels must be strings");
          bad = true;
          break;
        }
        const LabelId label = l.get<std::string>();
        if (!taxonomy.contains(label)) {
          report(line_no, doc.id, Errc::GoldOutsideTaxonomy,
                 where + ": doc '" + doc.id + "' has gold label '" + label +
                     "' outside the taxonomy");
          bad = true;
          break;
        }
        gold.insert(label);
      }
      if (bad) continue;
      doc.gold_labels = std::move(gold);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline void write_documents(const std::string& path, const std::vector<DocumentRecord>& docs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  for (const auto& d : docs) {
    json obj{{"id", d.id}, {"text", d.text}};
    if (d.gold_labels) obj["labels"] = std::vector<LabelId>(d.gold_labels->begin(), d.gold_labels->end());
    out << obj.dump() << "\n";
  }
  if (!out) fail(Errc::IoError, "failed writing '" + path + "'");
}

struct CorpusStats {
  std::size_t n_docs = 0;
  std::size_t cardinality = 0;        // |L|
  double avg_labels_per_doc = 0.0;    // sum |Y_i| / n_docs
  std::map<LabelId, std::size_t> label_support;
};

// Every document must carry gold labels; stats over partially labeled data
// would silently misreport the label average.
inline CorpusStats corpus_stats(const std::vector<DocumentRecord>& docs,
                                const Taxonomy& taxonomy) {
  if (docs.empty()) fail(Errc::EmptyCorpus, "cannot compute statistics of an empty corpus");
  CorpusStats stats;
  stats.n_docs = docs.size();
  stats.cardinality = taxonomy.size();
  std::uint64_t total_labels = 0;
  for (const auto& d : docs) {
    if (!d.gold_labels)
      fail(Errc::NoGoldLabels, "document '" + d.id + "' has no gold labels");
    total_labels += d.gold_labels->size();
    for (const auto& l : *d.gold_labels) ++stats.label_support[l];
  }
  stats.avg_labels_per_doc = static_cast<double>(total_labels) / static_cast<double>(docs.size());
  return stats;
}

struct SplitSpec {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::vector<std::size_t> subsample_sizes;
};

inline void validate_split_spec(const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    fail(Errc::InvalidSplit, "train fraction must be in (0,1)");
  if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0))
    fail(Errc::InvalidSplit, "validation fraction must be in (0,1)");
  if (spec.train_fraction + spec.val_fraction > 1.0)
    fail(Errc::InvalidSplit, "train and validation fractions must sum to at most 1");
}

// Uniform sample without replacement: a seeded shuffle followed by a prefix
// take. Samples nest: sample(seed, a) is a subset of sample(seed, b) for
// a <= b, which keeps data-scaling curves monotone in data rather than in
// sampling noise.
inline std::vector<DocumentRecord> subsample_train(const std::vector<DocumentRecord>& docs,
                                                   const SplitSpec& spec, std::size_t size) {
  if (size > docs.size())
    fail(Errc::SizeTooLarge, "requested sample of " + std::to_string(size) + " from " +
                                 std::to_string(docs.size()) + " documents");
  const auto order = detail::seeded_permutation(docs.size(), spec.seed);
  std::vector<DocumentRecord> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(docs[order[i]]);
  return out;
}

struct CorpusSplit {
  std::vector<DocumentRecord> train;
  std::vector<DocumentRecord> val;
  std::vector<DocumentRecord> test;
};

inline CorpusSplit split_corpus(const std::vector<DocumentRecord>& docs, const SplitSpec& spec) {
  validate_split_spec(spec);
  if (docs.empty()) fail(Errc::EmptyCorpus, "cannot split an empty corpus");
  const auto order = detail::seeded_permutation(docs.size(), spec.seed);
  const auto n = docs.size();
  const auto n_train = static_cast<std::size_t>(spec.train_fraction * static_cast<double>(n));
  const auto n_val = static_cast<std::size_t>(spec.val_fraction * static_cast<double>(n));
  CorpusSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& doc = docs[order[i]];
    if (i < n_train)
      split.train.push_back(doc);
    else if (i < n_train + n_val)
      split.val.push_back(doc);
    else
      split.test.push_back(doc);
  }
  return split;
}

}  // namespace retag
