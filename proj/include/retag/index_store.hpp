#pragma once

// On-disk layout of a persisted index (one directory):
//   taxonomy.jsonl  - label manifest: id, name, description
//   vectors.txve    - unit-norm label vectors, in index row order
//   meta.json       - {count, dim, version, format}
// Rows round-trip byte-identically: vectors are stored normalized and are
// not recomputed on load.

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "retag/dataset.hpp"
#include "retag/errors.hpp"
#include "retag/label_index.hpp"
#include "retag/types.hpp"
#include "retag/vector_file.hpp"

namespace retag {

struct StoredIndex {
  SemanticIndex index;
  Taxonomy taxonomy;
};

inline void save_index(const std::string& dir, const SemanticIndex& index,
                       const Taxonomy& taxonomy) {
  if (index.size() != taxonomy.size())
    fail(Errc::CountMismatch, "index has " + std::to_string(index.size()) +
                                  " rows but the taxonomy has " +
                                  std::to_string(taxonomy.size()) + " labels");
  for (const auto& row : index.rows()) {
    if (!taxonomy.contains(row.id))
      fail(Errc::UnknownLabel, "index row '" + row.id + "' is not in the taxonomy");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  write_taxonomy((std::filesystem::path(dir) / "taxonomy.jsonl").string(), taxonomy);

  std::vector<VectorRecord> records;
  records.reserve(index.size());
  for (const auto& row : index.rows()) records.push_back({row.id, row.vec});
  write_vector_file((std::filesystem::path(dir) / "vectors.txve").string(), records);

  json meta;
  meta["count"] = index.size();
  meta["dim"] = index.dim();
  meta["version"] = index.version();
  meta["format"] = "txve";
  std::ofstream out(std::filesystem::path(dir) / "meta.json", std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write index metadata in '" + dir + "'");
  out << meta.dump(2) << "\n";
}

inline StoredIndex load_index(const std::string& dir) {
  const auto meta_path = std::filesystem::path(dir) / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) fail(Errc::IoError, "cannot open '" + meta_path.string() + "'");
  json meta = json::parse(meta_in, nullptr, false);
  if (meta.is_discarded() || !meta.is_object())
    fail(Errc::CorruptHeader, meta_path.string() + ": invalid JSON");
  const auto count = meta.value("count", std::size_t{0});
  const auto dim = meta.value("dim", std::size_t{0});
  const auto version = meta.value("version", std::uint64_t{0});

  StoredIndex stored;
  stored.taxonomy = Taxonomy::restore(
      load_taxonomy((std::filesystem::path(dir) / "taxonomy.jsonl").string()).entries(), version);

  auto records = load_vector_file((std::filesystem::path(dir) / "vectors.txve").string());
  if (records.size() != count)
    fail(Errc::CountMismatch, dir + ": metadata promises " + std::to_string(count) +
                                  " rows, vector file has " + std::to_string(records.size()));
  std::vector<SemanticIndex::Row> rows;
  rows.reserve(records.size());
  for (auto& rec : records) {
    if (!stored.taxonomy.contains(rec.id))
      fail(Errc::UnknownLabel, dir + ": vector row '" + rec.id + "' is not in taxonomy.jsonl");
    rows.push_back({std::move(rec.id), std::move(rec.vec)});
  }
  if (rows.size() != stored.taxonomy.size())
    fail(Errc::CountMismatch, dir + ": row count and taxonomy label count differ");
  stored.index = SemanticIndex::restore(std::move(rows), dim, version);
  return stored;
}

}  // namespace retag
