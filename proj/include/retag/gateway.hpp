#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "retag/dataset.hpp"
#include "retag/errors.hpp"
#include "retag/hashing.hpp"
#include "retag/types.hpp"
#include "retag/vector_file.hpp"
#include "retag/vector_math.hpp"

namespace retag {

struct RemoteServiceConfig {
  std::string base_url;        // e.g. http://127.0.0.1:8900
  std::string model_name;
  int batch_size = 16;
  double timeout_sec = 30.0;
  int max_retries = 3;         // retries after the first attempt
  int backoff_ms = 250;        // doubles per retry
  int max_in_flight = 4;
  std::string auth_token;      // sent as "Authorization: Bearer <token>" when set
  // Optional instruction prefix some embedding models expect; prepended to
  // every text before embedding (and before cache keying).
  std::string instruction_prefix;
  // When > 0, texts longer than this only produce a warning on stderr; the
  // service owns its context limit, nothing is truncated here.
  std::size_t warn_above_chars = 0;
};

// Where embeddings come from: a precomputed vector file or a remote service
// speaking POST {base_url}/embed {"model":..., "texts":[...]} ->
// {"vectors":[[...]]}.
struct EmbeddingSource {
  enum class Kind { VectorFile, RemoteService };

  Kind kind = Kind::VectorFile;
  std::string path;  // VectorFile only
  RemoteServiceConfig remote;
  std::optional<std::size_t> expected_dim;

  static EmbeddingSource vector_file(std::string file_path,
                                     std::optional<std::size_t> dim = std::nullopt) {
    EmbeddingSource s;
    s.kind = Kind::VectorFile;
    s.path = std::move(file_path);
    s.expected_dim = dim;
    return s;
  }

  static EmbeddingSource remote_service(RemoteServiceConfig config,
                                        std::optional<std::size_t> dim = std::nullopt) {
    EmbeddingSource s;
    s.kind = Kind::RemoteService;
    s.remote = std::move(config);
    s.expected_dim = dim;
    return s;
  }
};

// Sole producer of embedding vectors. Remote requests are batched, retried
// with exponential backoff, and cached content-addressed on disk under
// sha256(model, text), so re-runs never cross-contaminate models and repeat
// texts embed exactly once. File-backed sources serve lookups from a vector
// file: by record id for corpus joins, by raw text for embed_texts.
class EmbeddingGateway {
 public:
  explicit EmbeddingGateway(EmbeddingSource source, std::string cache_dir = {})
      : source_(std::move(source)),
        cache_dir_(std::move(cache_dir)),
        in_flight_(source_.remote.max_in_flight > 0 ? source_.remote.max_in_flight : 1) {}

  const EmbeddingSource& source() const { return source_; }

  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].empty())
        fail(Errc::EmptyText, "text at position " + std::to_string(i) + " is empty");
    }
    std::vector<std::string> prepared;
    prepared.reserve(texts.size());
    for (const auto& t : texts) {
      if (source_.remote.warn_above_chars > 0 && t.size() > source_.remote.warn_above_chars)
        std::fprintf(stderr, "retag: warning: text of %zu chars exceeds the %zu-char guard\n",
                     t.size(), source_.remote.warn_above_chars);
      prepared.push_back(source_.remote.instruction_prefix + t);
    }

    if (source_.kind == EmbeddingSource::Kind::VectorFile) return lookup_texts(prepared);

    std::vector<std::optional<EmbeddingVector>> out(prepared.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      if (auto cached = cache_get(prepared[i])) {
        out[i] = std::move(*cached);
      } else {
        misses.push_back(i);
      }
    }
    const int batch = source_.remote.batch_size > 0 ? source_.remote.batch_size : 1;
    for (std::size_t begin = 0; begin < misses.size();
         begin += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(misses.size(), begin + static_cast<std::size_t>(batch));
      std::vector<std::string> chunk;
      chunk.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) chunk.push_back(prepared[misses[i]]);
      auto vectors = remote_embed(chunk);
      for (std::size_t i = begin; i < end; ++i) {
        cache_put(prepared[misses[i]], vectors[i - begin]);
        out[misses[i]] = std::move(vectors[i - begin]);
      }
    }

    std::vector<EmbeddingVector> result;
    result.reserve(out.size());
    std::size_t dim = source_.expected_dim.value_or(0);
    for (auto& v : out) {
      if (dim == 0) dim = v->dim();
      if (v->dim() != dim)
        fail(Errc::DimensionMismatch, "embedding dimensions disagree (" + std::to_string(dim) +
                                          " vs " + std::to_string(v->dim()) + ")");
      result.push_back(std::move(*v));
    }
    return result;
  }

  EmbeddingVector embed_text(const std::string& text) {
    return embed_texts({text}).front();
  }

  // File-backed sources only: fetch the vector stored under a record id.
  std::optional<EmbeddingVector> lookup_id(const std::string& id) {
    if (source_.kind != EmbeddingSource::Kind::VectorFile) return std::nullopt;
    ensure_file_loaded();
    auto it = file_records_.find(id);
    if (it == file_records_.end()) return std::nullopt;
    return it->second;
  }

  std::uint64_t remote_calls() const { return remote_calls_.load(); }
  std::uint64_t texts_sent() const { return texts_sent_.load(); }

 private:
  std::vector<EmbeddingVector> lookup_texts(const std::vector<std::string>& texts) {
    ensure_file_loaded();
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto it = file_records_.find(t);
      if (it == file_records_.end())
        fail(Errc::VectorNotFound,
             "vector file '" + source_.path + "' has no record for the requested text");
      out.push_back(it->second);
    }
    return out;
  }

  void ensure_file_loaded() {
    std::call_once(file_once_, [this] {
      for (auto& rec : load_vector_file(source_.path)) {
        if (source_.expected_dim && rec.vec.dim() != *source_.expected_dim)
          fail(Errc::DimensionMismatch,
               "vector file record '" + rec.id + "' has dimension " +
                   std::to_string(rec.vec.dim()) + ", expected " +
                   std::to_string(*source_.expected_dim));
        file_records_.emplace(std::move(rec.id), std::move(rec.vec));
      }
    });
  }

  std::string cache_key(const std::string& text) const {
    // \x1f separates model and text so no (model, text) pair is ambiguous.
    return sha256_hex(source_.remote.model_name + '\x1f' + text);
  }

  std::filesystem::path cache_path(const std::string& key) const {
    return std::filesystem::path(cache_dir_) / key.substr(0, 2) / (key + ".txve");
  }

  std::optional<EmbeddingVector> cache_get(const std::string& text) {
    if (cache_dir_.empty()) return std::nullopt;
    const std::string key = cache_key(text);
    const auto path = cache_path(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    auto records = load_vector_file(path.string());
    if (records.size() != 1 || records[0].id != key)
      fail(Errc::CorruptHeader, "cache entry '" + path.string() + "' is inconsistent");
    return std::move(records[0].vec);
  }

  void cache_put(const std::string& text, const EmbeddingVector& vec) {
    if (cache_dir_.empty()) return;
    const std::string key = cache_key(text);
    const auto path = cache_path(key);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    // Write-then-rename keeps concurrent writers atomic per key; values are
    // deterministic per key so last-writer-wins is fine.
    const auto tmp = path.string() + "." + std::to_string(::getpid()) + "." +
                     std::to_string(tmp_counter_.fetch_add(1)) + ".tmp";
    write_vector_file(tmp, {{key, vec}});
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
    }
  }

  std::vector<EmbeddingVector> remote_embed(const std::vector<std::string>& texts) {
    const auto& cfg = source_.remote;
    if (cfg.base_url.empty())
      fail(Errc::ServiceUnreachable, "no embedding service URL configured");

    std::string origin = cfg.base_url;
    std::string prefix;
    const auto scheme_pos = origin.find("://");
    if (scheme_pos != std::string::npos) {
      const auto slash = origin.find('/', scheme_pos + 3);
      if (slash != std::string::npos) {
        prefix = origin.substr(slash);
        origin = origin.substr(0, slash);
      }
    }
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    json body;
    body["model"] = cfg.model_name;
    body["texts"] = texts;
    const std::string payload = body.dump();

    std::counting_semaphore<>& gate = in_flight_;
    gate.acquire();
    struct Release {
      std::counting_semaphore<>& sem;
      ~Release() { sem.release(); }
    } release{gate};

    httplib::Result res;
    for (int attempt = 0;; ++attempt) {
      httplib::Client client(origin);
      const auto timeout = std::chrono::duration<double>(cfg.timeout_sec);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      httplib::Headers headers;
      if (!cfg.auth_token.empty())
        headers.emplace("Authorization", "Bearer " + cfg.auth_token);
      remote_calls_.fetch_add(1);
      texts_sent_.fetch_add(texts.size());
      res = client.Post(prefix + "/embed", headers, payload, "application/json");
      if (res && res->status >= 200 && res->status < 300) break;
      const bool transient = !res || res->status >= 500;
      if (!transient || attempt >= cfg.max_retries) {
        std::string detail = res ? "HTTP status " + std::to_string(res->status)
                                 : "transport error: " + httplib::to_string(res.error());
        fail(Errc::ServiceUnreachable,
             "embedding service at " + cfg.base_url + " unreachable (" + detail + ")");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms) *
                                  (1 << std::min(attempt, 10)));
    }

    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("vectors") ||
        !parsed["vectors"].is_array())
      fail(Errc::MalformedResponse, "embedding service returned no \"vectors\" array");
    const auto& vectors = parsed["vectors"];
    if (vectors.size() != texts.size())
      fail(Errc::MalformedResponse, "requested " + std::to_string(texts.size()) +
                                        " embeddings, received " + std::to_string(vectors.size()));
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
      if (!v.is_array()) fail(Errc::MalformedResponse, "embedding is not an array of numbers");
      EmbeddingVector vec;
      vec.values.reserve(v.size());
      for (const auto& x : v) {
        if (!x.is_number()) fail(Errc::MalformedResponse, "embedding entry is not a number");
        vec.values.push_back(x.get<float>());
      }
      if (!all_finite(vec))
        fail(Errc::MalformedResponse, "embedding contains a non-finite entry");
      if (source_.expected_dim && vec.dim() != *source_.expected_dim)
        fail(Errc::DimensionMismatch, "embedding service returned dimension " +
                                          std::to_string(vec.dim()) + ", expected " +
                                          std::to_string(*source_.expected_dim));
      out.push_back(std::move(vec));
    }
    return out;
  }

  EmbeddingSource source_;
  std::string cache_dir_;
  std::counting_semaphore<> in_flight_;
  std::once_flag file_once_;
  std::unordered_map<std::string, EmbeddingVector> file_records_;
  std::atomic<std::uint64_t> remote_calls_{0};
  std::atomic<std::uint64_t> texts_sent_{0};
  std::atomic<std::uint64_t> tmp_counter_{0};
};

// Fills in document embeddings: file sources join on document id, remote
// sources embed the document text. In lenient mode documents that cannot be
// embedded are dropped and reported; strict mode throws on the first one.
inline void attach_document_embeddings(std::vector<DocumentRecord>& docs, EmbeddingGateway& gateway,
                                       bool lenient = false,
                                       std::vector<LoadIssue>* issues = nullptr) {
  if (gateway.source().kind == EmbeddingSource::Kind::VectorFile) {
    std::vector<DocumentRecord> kept;
    kept.reserve(docs.size());
    for (auto& doc : docs) {
      auto vec = gateway.lookup_id(doc.id);
      if (!vec) {
        if (!lenient)
          fail(Errc::VectorNotFound,
               "no vector for doc '" + doc.id + "' in '" + gateway.source().path + "'");
        if (issues) issues->push_back({0, doc.id, "no vector for doc '" + doc.id + "'"});
        continue;
      }
      doc.embedding = std::move(*vec);
      kept.push_back(std::move(doc));
    }
    docs = std::move(kept);
    return;
  }
  std::vector<DocumentRecord> kept;
  std::vector<std::string> texts;
  kept.reserve(docs.size());
  for (auto& doc : docs) {
    if (doc.text.empty()) {
      if (!lenient) fail(Errc::EmptyText, "doc '" + doc.id + "' has no text to embed");
      if (issues) issues->push_back({0, doc.id, "doc '" + doc.id + "' has no text to embed"});
      continue;
    }
    kept.push_back(std::move(doc));
    texts.push_back(kept.back().text);
  }
  auto vectors = gateway.embed_texts(texts);
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].embedding = std::move(vectors[i]);
  docs = std::move(kept);
}

// Embeds every label description (or joins by label id for file sources).
// All labels must resolve; a partially embedded taxonomy cannot back an
// index.
inline Taxonomy with_label_embeddings(const Taxonomy& taxonomy, EmbeddingGateway& gateway) {
  std::vector<LabelEntry> entries = taxonomy.entries();
  if (gateway.source().kind == EmbeddingSource::Kind::VectorFile) {
    for (auto& entry : entries) {
      auto vec = gateway.lookup_id(entry.id);
      if (!vec)
        fail(Errc::VectorNotFound,
             "no vector for label '" + entry.id + "' in '" + gateway.source().path + "'");
      entry.embedding = std::move(*vec);
    }
  } else {
    std::vector<std::string> texts;
    texts.reserve(entries.size());
    for (const auto& entry : entries) texts.push_back(entry.description);
    auto vectors = gateway.embed_texts(texts);
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].embedding = std::move(vectors[i]);
  }
  return Taxonomy::restore(std::move(entries), taxonomy.version());
}

}  // namespace retag
