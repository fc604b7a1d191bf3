#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "retag/annotator.hpp"
#include "retag/errors.hpp"
#include "retag/gateway.hpp"
#include "retag/label_index.hpp"
#include "retag/types.hpp"

namespace retag {

struct ServiceConfig {
  int default_k = 5;  // tuned k* used when a request does not pass k
};

// HTTP annotation service with live taxonomy evolution. Mutations build a
// fresh snapshot and swap it in atomically (copy-on-write), so every request
// is served against exactly one consistent (index, taxonomy) pair and
// in-flight predictions never observe a half-applied change. Writers are
// serialized; readers only take the snapshot pointer.
class AnnotationService {
 public:
  struct Snapshot {
    SemanticIndex index;
    Taxonomy taxonomy;
  };

  AnnotationService(SemanticIndex index, Taxonomy taxonomy,
                    std::shared_ptr<EmbeddingGateway> gateway, ServiceConfig config = {})
      : gateway_(std::move(gateway)), config_(config) {
    snapshot_ = std::make_shared<const Snapshot>(
        Snapshot{std::move(index), std::move(taxonomy)});
    install_routes();
  }

  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  void stop() { server_.stop(); }

  void wait_until_ready() const {
    while (!server_.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    return snapshot_;
  }

  std::uint64_t requests_served() const { return requests_.load(); }

 private:
  void swap_snapshot(std::shared_ptr<const Snapshot> next) {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    snapshot_ = std::move(next);
  }

  static int status_for(const Error& e) {
    switch (e.family()) {
      case ErrorFamily::Dimension:
        return 422;
      case ErrorFamily::Service:
        return 503;
      default:
        return 400;
    }
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    json body{{"error", message}};
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static bool require_json(const httplib::Request& req, httplib::Response& res) {
    const auto type = req.get_header_value("Content-Type");
    if (type.rfind("application/json", 0) != 0) {
      send_error(res, 400, "content-type must be application/json");
      return false;
    }
    return true;
  }

  void install_routes() {
    server_.Post("/v1/predict", [this](const httplib::Request& req, httplib::Response& res) {
      if (!require_json(req, res)) return;
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        send_error(res, 400, "request body is not a JSON object");
        return;
      }
      const bool has_text = body.contains("text") && !body["text"].is_null();
      const bool has_vector = body.contains("vector") && !body["vector"].is_null();
      if (has_text == has_vector) {
        send_error(res, 400, "exactly one of \"text\" or \"vector\" must be supplied");
        return;
      }
      int k = config_.default_k;
      if (auto it = body.find("k"); it != body.end() && !it->is_null()) {
        if (!it->is_number_integer()) {
          send_error(res, 400, "\"k\" must be an integer");
          return;
        }
        k = it->get<int>();
      }
      try {
        if (k < 1) fail(Errc::InvalidK, "k must be >= 1, got " + std::to_string(k));
        EmbeddingVector query;
        if (has_vector) {
          if (!body["vector"].is_array()) fail(Errc::MalformedLine, "\"vector\" must be an array");
          for (const auto& x : body["vector"]) {
            if (!x.is_number()) fail(Errc::MalformedLine, "\"vector\" entries must be numbers");
            query.values.push_back(x.get<float>());
          }
        } else {
          if (!body["text"].is_string()) fail(Errc::MalformedLine, "\"text\" must be a string");
          if (!gateway_) fail(Errc::ServiceUnreachable, "no embedding gateway configured");
          query = gateway_->embed_text(body["text"].get<std::string>());
        }
        const auto snap = snapshot();  // one consistent view per request
        const auto items = snap->index.search_top_k(query, k);
        json out;
        if (auto it = body.find("doc_id"); it != body.end() && it->is_string())
          out["doc_id"] = it->get<std::string>();
        json labels = json::array(), scores = json::array();
        for (const auto& item : items) {
          labels.push_back(item.label);
          scores.push_back(item.score);
        }
        out["labels"] = labels;
        out["scores"] = scores;
        out["taxonomy_version"] = snap->taxonomy.version();
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, status_for(e), e.what());
      }
    });

    server_.Post("/v1/labels", [this](const httplib::Request& req, httplib::Response& res) {
      if (!require_json(req, res)) return;
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        send_error(res, 400, "request body is not a JSON object");
        return;
      }
      LabelEntry entry;
      if (!body.contains("id") || !body["id"].is_string() || body["id"].get<std::string>().empty()) {
        send_error(res, 400, "missing or empty \"id\"");
        return;
      }
      entry.id = body["id"].get<std::string>();
      entry.name = body.value("name", entry.id);
      entry.description = body.value("description", std::string{});
      if (entry.description.empty()) {
        send_error(res, 400, "missing or empty \"description\"");
        return;
      }

      std::lock_guard<std::mutex> writer(write_mutex_);
      const auto current = snapshot();
      if (current->taxonomy.contains(entry.id)) {
        send_error(res, 409, "label '" + entry.id + "' already exists");
        return;
      }
      try {
        // One embedding call; existing rows are never recomputed. On any
        // failure the old snapshot stays in place untouched.
        if (!gateway_) fail(Errc::ServiceUnreachable, "no embedding gateway configured");
        entry.embedding = gateway_->embed_text(entry.description);
        auto next = std::make_shared<Snapshot>(*current);
        next->taxonomy.add(entry);
        next->index.add(entry);
        const auto version = next->taxonomy.version();
        swap_snapshot(std::move(next));
        json out{{"taxonomy_version", version}};
        res.status = 201;
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        send_error(res, status_for(e), e.what());
      }
    });

    server_.Delete(R"(/v1/labels/(.+))", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      const std::string id = req.matches[1];
      std::lock_guard<std::mutex> writer(write_mutex_);
      const auto current = snapshot();
      if (!current->taxonomy.contains(id)) {
        send_error(res, 404, "unknown label '" + id + "'");
        return;
      }
      auto next = std::make_shared<Snapshot>(*current);
      next->taxonomy.remove(id);
      next->index.remove(id);
      const auto version = next->taxonomy.version();
      swap_snapshot(std::move(next));
      json out{{"taxonomy_version", version}};
      res.set_content(out.dump(), "application/json");
    });

    server_.Get("/v1/taxonomy", [this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      json labels = json::array();
      for (const auto& e : snap->taxonomy.entries()) {
        labels.push_back({{"id", e.id}, {"name", e.name}, {"description", e.description}});
      }
      json out{{"version", snap->taxonomy.version()}, {"labels", labels}};
      res.set_content(out.dump(), "application/json");
    });

    server_.Get("/v1/healthz", [this](const httplib::Request&, httplib::Response& res) {
      const auto snap = snapshot();
      const auto stats = snap->index.stats();
      json out{{"status", "ok"},
               {"labels", stats.count},
               {"dim", stats.dim},
               {"taxonomy_version", snap->taxonomy.version()},
               {"requests", requests_.load()}};
      res.set_content(out.dump(), "application/json");
    });

    server_.set_pre_routing_handler([this](const httplib::Request&, httplib::Response&) {
      request_start() = std::chrono::steady_clock::now();
      requests_.fetch_add(1);
      return httplib::Server::HandlerResponse::Unhandled;
    });

    // One structured line per request on stderr.
    server_.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                               std::chrono::steady_clock::now() - request_start())
                               .count();
      const auto snap = snapshot();
      json line{{"method", req.method},
                {"path", req.path},
                {"status", res.status},
                {"latency_us", elapsed},
                {"taxonomy_version", snap->taxonomy.version()}};
      std::fprintf(stderr, "%s\n", line.dump().c_str());
    });
  }

  static std::chrono::steady_clock::time_point& request_start() {
    thread_local std::chrono::steady_clock::time_point start;
    return start;
  }

  httplib::Server server_;
  std::shared_ptr<EmbeddingGateway> gateway_;
  ServiceConfig config_;
  mutable std::mutex snapshot_mutex_;
  std::mutex write_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::atomic<std::uint64_t> requests_{0};
};

}  // namespace retag
