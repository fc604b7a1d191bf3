// Acceptance suite. Each criterion is one test that prints a single
// "CRITERION n: PASS|FAIL" line; run this binary directly to see them all.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "retag/annotator.hpp"
#include "retag/audit.hpp"
#include "retag/cost_model.hpp"
#include "retag/dataset.hpp"
#include "retag/gateway.hpp"
#include "retag/index_store.hpp"
#include "retag/label_index.hpp"
#include "retag/metrics.hpp"
#include "retag/predictions_io.hpp"
#include "retag/scaling.hpp"
#include "retag/service.hpp"
#include "retag/telemetry.hpp"
#include "retag/tuner.hpp"
#include "retag/vector_file.hpp"
#include "test_support.hpp"

namespace retag {
namespace {

void report(int criterion, const std::string& what) {
  const bool ok = !::testing::Test::HasFailure();
  std::printf("CRITERION %d: %s - %s\n", criterion, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
}

// --- criterion 1: zero hallucination across fuzzed runs ---------------------

TEST(Acceptance, C1_ZeroHallucinationGuarantee) {
  std::mt19937_64 rng(0xC1);
  std::size_t total_predictions = 0;
  std::size_t audited_samples = 0;
  testing::TempDir dir("c1");

  for (int run = 0; run < 1000; ++run) {
    const std::size_t k_labels = 1 + rng() % 200;
    const std::size_t dim = 2 + rng() % 127;
    const auto taxonomy = testing::random_taxonomy(rng, k_labels, dim);
    const auto index = SemanticIndex::build(taxonomy);

    AnnotatorConfig config;
    config.strategy = (run % 2 == 0) ? Strategy::LabelSimilarity : Strategy::NeighborVote;
    config.k = 1 + static_cast<int>(rng() % (k_labels + 2));
    config.vote_neighbors = 1 + static_cast<int>(rng() % 8);

    TrainingCorpusIndex corpus;
    if (config.strategy == Strategy::NeighborVote) {
      std::vector<DocumentRecord> train;
      const std::size_t n_train = 1 + rng() % 12;
      for (std::size_t i = 0; i < n_train; ++i) {
        std::set<LabelId> gold{testing::label_name(rng() % k_labels)};
        if (rng() % 2) gold.insert(testing::label_name(rng() % k_labels));
        train.push_back(
            {"t" + std::to_string(i), "", gold, testing::random_vector(rng, dim)});
      }
      corpus = TrainingCorpusIndex::build(train, taxonomy);
    }

    std::vector<std::pair<std::string, EmbeddingVector>> queries;
    const std::size_t n_docs = 1 + rng() % 3;
    for (std::size_t i = 0; i < n_docs; ++i)
      queries.emplace_back("doc-" + std::to_string(i), testing::random_vector(rng, dim));

    const auto batch = predict_batch(queries, &index,
                                     corpus.empty() ? nullptr : &corpus, config);
    ASSERT_TRUE(batch.errors.empty());

    for (const auto& p : batch.predictions) {
      total_predictions += p.items.size();
      for (const auto& item : p.items)
        ASSERT_TRUE(taxonomy.contains(item.label)) << "run " << run;
      ASSERT_TRUE(validate_or_reject(p, taxonomy).empty()) << "run " << run;
    }

    const auto audit = audit_prediction_sets(batch.predictions, taxonomy);
    ASSERT_EQ(audit.n_hallucinating_samples, 0u) << "run " << run;
    ASSERT_DOUBLE_EQ(audit.rate, 0.0);
    audited_samples += audit.n_samples;

    if (run % 100 == 0) {  // the file path too, every so often
      const auto path = dir.file("preds.jsonl");
      write_predictions(path, batch.predictions);
      const auto file_audit = audit_predictions(path, taxonomy);
      ASSERT_EQ(file_audit.n_hallucinating_samples, 0u);
    }
  }
  ASSERT_GT(total_predictions, 0u);
  ASSERT_GE(audited_samples, 1000u);
  report(1, "zero hallucinations across 1000 fuzzed runs, both strategies, audit count 0");
}

// --- criterion 2: exact top-k against the brute-force oracle ----------------

TEST(Acceptance, C2_TopKOracleEquivalence) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(0xC2);
  for (int run = 0; run < 1000; ++run) {
    const std::size_t k_labels = 1 + rng() % 1000;
    const std::size_t dim = 2 + rng() % 63;
    std::vector<std::pair<std::string, std::vector<float>>> raw_rows;
    Taxonomy taxonomy;
    for (std::size_t i = 0; i < k_labels; ++i) {
      auto vec = testing::random_vector(rng, dim);
      if (i > 0 && rng() % 17 == 0) vec.values = raw_rows[rng() % i].second;  // planted ties
      raw_rows.emplace_back(testing::label_name(i), vec.values);
      taxonomy.add({testing::label_name(i), "", "d", vec});
    }
    const auto index = SemanticIndex::build(taxonomy);
    const auto query = testing::random_vector(rng, dim);
    const int k = 1 + static_cast<int>(rng() % (k_labels + 5));

    const auto got = index.search_top_k(query, k);
    const auto expected =
        testing::oracle_top_k(raw_rows, query.values, static_cast<std::size_t>(k));
    ASSERT_EQ(got.size(), expected.size()) << "run " << run;
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_EQ(got[i].label, expected[i].id) << "run " << run << " rank " << i;
      ASSERT_EQ(got[i].score, expected[i].score) << "run " << run << " rank " << i;
    }
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
      std::chrono::steady_clock::now() - start);
  EXPECT_LT(elapsed.count(), 60) << "suite must stay under a minute";
  report(2, "search_top_k equals the sort-all oracle on 1000 random instances in " +
                std::to_string(elapsed.count()) + "s");
}

// --- criterion 3: metrics against the naive oracle --------------------------

TEST(Acceptance, C3_MetricsOracleEquivalence) {
  {
    LabelConfusion c;
    c.per_label["A"] = {1, 1, 1};  // tp=1 fp=1 fn=1 -> micro F1 = 0.5 exactly
    ASSERT_DOUBLE_EQ(micro_f1(c), 0.5);
  }
  std::mt19937_64 rng(0xC3);
  for (int run = 0; run < 500; ++run) {
    const std::size_t n_labels = 1 + rng() % 10;
    const std::size_t n_docs = 1 + rng() % 20;
    const auto taxonomy = testing::random_taxonomy(rng, n_labels, 2);
    std::vector<PredictionSet> preds;
    std::vector<DocumentRecord> docs;
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> pairs;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::set<LabelId> gold;
      std::set<std::string> predicted;
      for (std::size_t l = 0; l < n_labels; ++l) {
        if (rng() % 3 == 0) gold.insert(testing::label_name(l));
        if (rng() % 3 == 0) predicted.insert(testing::label_name(l));
      }
      docs.push_back({std::to_string(d), "", gold, std::nullopt});
      PredictionSet p;
      p.doc_id = std::to_string(d);
      for (const auto& l : predicted) p.items.push_back({l, 0.5});
      preds.push_back(std::move(p));
      pairs.emplace_back(predicted, gold);
    }
    const auto report_eval = evaluate(preds, docs, taxonomy);
    const auto expected = testing::oracle_f1(pairs);
    ASSERT_NEAR(report_eval.micro_f1, expected.micro_f1, 1e-9) << "run " << run;
    ASSERT_NEAR(report_eval.macro_f1, expected.macro_f1, 1e-9) << "run " << run;
  }
  report(3, "micro/macro F1 match the naive oracle to 1e-9 on 500 instances, "
            "hand-worked micro F1 = 0.5 exact");
}

// --- criterion 4: audit fixtures reproduce the planted hallucination rates ---

TEST(Acceptance, C4_AuditFixtures) {
  struct Expected {
    const char* taxonomy;
    const char* predictions;
    std::size_t samples;
    std::size_t count;
    const char* rate;
    const char* top0;
    const char* top1;
  };
  const Expected cases[] = {
      {"taxonomy_ecthr_a.jsonl", "predictions_gen_ecthr_a.jsonl", 1000, 9, "0.9%", "Article 7",
       "Article 18"},
      {"taxonomy_ecthr_b.jsonl", "predictions_gen_ecthr_b.jsonl", 1000, 7, "0.7%", "Article 13",
       "Article 7"},
      {"taxonomy_eurlex.jsonl", "predictions_gen_eurlex.jsonl", 5000, 6, "0.12%", "statistics",
       "insurance"},
  };
  for (const auto& expected : cases) {
    const auto taxonomy = load_taxonomy(testing::fixture_path(expected.taxonomy));
    const auto audit =
        audit_predictions(testing::fixture_path(expected.predictions), taxonomy);
    ASSERT_EQ(audit.n_samples, expected.samples) << expected.predictions;
    ASSERT_EQ(audit.n_hallucinating_samples, expected.count) << expected.predictions;
    ASSERT_EQ(format_rate(audit.rate), expected.rate) << expected.predictions;
    ASSERT_GE(audit.top_hallucinated.size(), 2u);
    ASSERT_EQ(audit.top_hallucinated[0].first, expected.top0);
    ASSERT_EQ(audit.top_hallucinated[1].first, expected.top1);
  }
  report(4, "fixture audits yield exactly (9, 0.9%), (7, 0.7%), (6, 0.12%) with the "
            "expected top offenders");
}

// --- criterion 5: cost-model ratios and linearity ----------------------------

TEST(Acceptance, C5_CostModel) {
  const auto full = *cost_preset("full-ft");
  const auto lora = *cost_preset("lora-ft");
  const auto ret = *cost_preset("retrieval");

  ASSERT_NEAR(flops_finetune(full), 5.7e16, 0.02 * 5.7e16);
  ASSERT_NEAR(flops_finetune(lora), 3.8e16, 0.02 * 3.8e16);
  ASSERT_NEAR(flops_retrieval(ret), 1.9e15, 0.02 * 1.9e15);

  const double lora_ratio = cost_report(lora, ret).ratio;
  ASSERT_GE(lora_ratio, 19.0);
  ASSERT_LE(lora_ratio, 21.0);
  const double full_ratio = cost_report(full, ret).ratio;
  ASSERT_GE(full_ratio, 28.0);
  ASSERT_LE(full_ratio, 32.0);

  std::mt19937_64 rng(0xC5);
  std::uniform_real_distribution<double> value(0.5, 1e9);
  std::uniform_real_distribution<double> factor(0.1, 10.0);
  for (int draw = 0; draw < 200; ++draw) {
    CostParams p{value(rng), value(rng), value(rng), value(rng), value(rng), ""};
    const double c = factor(rng);
    CostParams scaled = p;
    switch (draw % 5) {
      case 0: scaled.n_params *= c; break;
      case 1: scaled.s_samples *= c; break;
      case 2: scaled.e_epochs *= c; break;
      case 3: scaled.l_seq *= c; break;
      case 4: scaled.s_test *= c; break;
    }
    if (draw % 5 == 4) {
      ASSERT_NEAR(flops_retrieval(scaled), c * flops_retrieval(p),
                  1e-9 * c * flops_retrieval(p));
    } else {
      ASSERT_NEAR(flops_finetune(scaled), c * flops_finetune(p),
                  1e-9 * c * flops_finetune(p));
      if (draw % 5 == 0 || draw % 5 == 3) {
        ASSERT_NEAR(flops_retrieval(scaled), c * flops_retrieval(p),
                    1e-9 * c * flops_retrieval(p));
      }
    }
  }
  report(5, "preset FLOPs within 2% of reference totals, ratios in [19,21] and [28,32], "
            "linearity on 200 draws");
}

// --- criterion 6: tuner on the constructed geometry --------------------------

TEST(Acceptance, C6_TunerConstructedGeometry) {
  Taxonomy taxonomy;
  const std::size_t n_labels = 16;
  for (std::size_t i = 0; i < n_labels; ++i) {
    EmbeddingVector axis;
    axis.values.assign(n_labels, 0.0f);
    axis.values[i] = 1.0f;
    taxonomy.add({testing::label_name(i), "", "axis topic", axis});
  }
  const auto index = SemanticIndex::build(taxonomy);

  std::mt19937_64 rng(0xC6);
  std::vector<DocumentRecord> docs;
  for (std::size_t d = 0; d < 60; ++d) {
    std::set<std::size_t> chosen;
    while (chosen.size() < 3) chosen.insert(rng() % n_labels);
    EmbeddingVector vec;
    vec.values.assign(n_labels, 0.0f);
    std::set<LabelId> gold;
    float weight = 1.0f;
    for (std::size_t axis : chosen) {
      vec.values[axis] = weight;
      weight -= 0.05f;
      gold.insert(testing::label_name(axis));
    }
    docs.push_back({"doc-" + std::to_string(d), "", gold, vec});
  }

  TuningSpec spec;
  spec.k_grid = default_k_grid();  // 1..20
  TuningReport first;
  for (int repeat = 0; repeat < 5; ++repeat) {
    const auto tuned = tune_k(docs, index, nullptr, spec, taxonomy);
    ASSERT_EQ(tuned.best_k, 3);
    ASSERT_DOUBLE_EQ(tuned.objective_at(3), 1.0);
    if (repeat == 0) {
      first = tuned;
    } else {
      ASSERT_EQ(tuned.per_k.size(), first.per_k.size());
      for (std::size_t i = 0; i < tuned.per_k.size(); ++i) {
        ASSERT_EQ(tuned.per_k[i].micro_f1, first.per_k[i].micro_f1);  // bit-identical
        ASSERT_EQ(tuned.per_k[i].macro_f1, first.per_k[i].macro_f1);
      }
    }

    // end-to-end prediction at k* scores a perfect F1
    std::vector<std::pair<std::string, EmbeddingVector>> queries;
    for (const auto& d : docs) queries.emplace_back(d.id, *d.embedding);
    AnnotatorConfig config;
    config.k = tuned.best_k;
    const auto batch = predict_batch(queries, &index, nullptr, config);
    const auto eval = evaluate(batch.predictions, docs, taxonomy);
    ASSERT_DOUBLE_EQ(eval.micro_f1, 1.0);
    ASSERT_DOUBLE_EQ(eval.macro_f1, 1.0);
  }
  report(6, "tune_k over 1..20 returns k*=3 with F1=1.0, end-to-end perfect, "
            "deterministic across 5 runs");
}

// --- criterion 7: O(1) taxonomy evolution ------------------------------------

TEST(Acceptance, C7_ConstantTimeLabelAddition) {
  testing::StubEmbedServer embed(24);
  RemoteServiceConfig cfg;
  cfg.base_url = embed.url();
  cfg.backoff_ms = 1;

  for (const std::size_t k_labels : {10u, 100u, 1000u}) {
    EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
    Taxonomy taxonomy;
    for (std::size_t i = 0; i < k_labels; ++i) {
      LabelEntry e;
      e.id = testing::label_name(i);
      e.description = "bulk topic " + std::to_string(i);
      taxonomy.add(e);
    }
    auto embedded = with_label_embeddings(taxonomy, gateway);
    auto index = SemanticIndex::build(embedded);
    ASSERT_EQ(index.size(), k_labels);

    const int calls_before = embed.calls();
    const int texts_before = embed.texts();
    const auto ops_before = telemetry::snapshot();

    LabelEntry fresh;
    fresh.id = "fresh-label";
    fresh.description = "a freshly added topic for K=" + std::to_string(k_labels);
    fresh.embedding = gateway.embed_text(fresh.description);
    index.add(fresh);

    const auto ops_after = telemetry::snapshot();
    ASSERT_EQ(embed.calls() - calls_before, 1) << "K=" << k_labels;
    ASSERT_EQ(embed.texts() - texts_before, 1) << "K=" << k_labels;
    ASSERT_EQ(ops_after.normalizations - ops_before.normalizations, 1u) << "K=" << k_labels;
    ASSERT_EQ(ops_after.dot_products - ops_before.dot_products, 0u) << "K=" << k_labels;
    ASSERT_EQ(index.size(), k_labels + 1);
  }

  // service-level: adds stay atomic under concurrent predict load for 30s,
  // closed-world check on every response
  const std::size_t dim = 24;
  Taxonomy taxonomy;
  for (std::size_t i = 0; i < 20; ++i) {
    LabelEntry e;
    e.id = testing::label_name(i);
    e.description = "soak base topic " + std::to_string(i);
    e.embedding = testing::stub_embedding(e.description, dim);
    taxonomy.add(e);
  }
  auto gateway = std::make_shared<EmbeddingGateway>(EmbeddingSource::remote_service(cfg));
  AnnotationService service(SemanticIndex::build(taxonomy), taxonomy, gateway,
                            ServiceConfig{3});
  const int port = service.bind_any_port("127.0.0.1");
  std::thread server_thread([&service] { service.listen_after_bind(); });
  service.wait_until_ready();

  std::map<std::uint64_t, std::set<std::string>> labels_at_version;
  {
    std::set<std::string> current;
    for (const auto& e : taxonomy.entries()) current.insert(e.id);
    std::uint64_t v = taxonomy.version();
    labels_at_version[v] = current;
    for (int i = 0; i < 4096; ++i) {
      current.insert("soak-" + std::to_string(i));
      labels_at_version[++v] = current;
    }
  }

  std::atomic<bool> done{false};
  std::atomic<std::uint64_t> responses{0};
  std::atomic<std::uint64_t> violations{0};
  std::vector<std::thread> clients;
  for (int t = 0; t < 4; ++t) {
    clients.emplace_back([&, t] {
      std::mt19937_64 rng(0xC700 + t);
      httplib::Client client("127.0.0.1", port);
      client.set_read_timeout(std::chrono::seconds(60));
      while (!done.load()) {
        json body;
        json arr = json::array();
        for (float x : testing::random_vector(rng, dim).values) arr.push_back(x);
        body["vector"] = arr;
        body["k"] = 3;
        auto res = client.Post("/v1/predict", body.dump(), "application/json");
        if (!res || res->status != 200) {
          violations.fetch_add(1);
          continue;
        }
        const json out = json::parse(res->body);
        const auto version = out["taxonomy_version"].get<std::uint64_t>();
        auto it = labels_at_version.find(version);
        if (it == labels_at_version.end()) {
          violations.fetch_add(1);
          continue;
        }
        for (const auto& l : out["labels"]) {
          if (!it->second.count(l.get<std::string>())) violations.fetch_add(1);
        }
        responses.fetch_add(1);
      }
    });
  }

  httplib::Client mutator("127.0.0.1", port);
  mutator.set_read_timeout(std::chrono::seconds(60));
  const auto soak_start = std::chrono::steady_clock::now();
  int added = 0;
  while (std::chrono::steady_clock::now() - soak_start < std::chrono::seconds(30)) {
    if (added < 4096) {
      auto res = mutator.Post("/v1/labels",
                              json{{"id", "soak-" + std::to_string(added)},
                                   {"description", "soak topic " + std::to_string(added)}}
                                  .dump(),
                              "application/json");
      ASSERT_TRUE(res);
      ASSERT_EQ(res->status, 201);
      ++added;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  done.store(true);
  for (auto& c : clients) c.join();
  service.stop();
  server_thread.join();

  ASSERT_EQ(violations.load(), 0u);
  ASSERT_GT(responses.load(), 100u);
  ASSERT_GT(added, 0);
  report(7, "label addition costs exactly 1 embedding call and 0 recomputations for "
            "K in {10,100,1000}; 30s concurrent soak (" +
                std::to_string(responses.load()) + " responses, " + std::to_string(added) +
                " adds) closed-world clean");
}

// --- criterion 8: scaling-harness shape ---------------------------------------

struct SyntheticClusters {
  Taxonomy taxonomy;
  SemanticIndex index;
  std::vector<DocumentRecord> train;
  std::vector<DocumentRecord> val;
  std::vector<DocumentRecord> test;
};

SyntheticClusters make_clusters(std::size_t n_labels, std::size_t n_train, std::size_t n_val,
                                std::size_t n_test, std::size_t dim, double noise,
                                std::uint64_t seed) {
  SyntheticClusters data;
  std::mt19937_64 rng(seed);
  std::vector<EmbeddingVector> centers;
  for (std::size_t i = 0; i < n_labels; ++i) {
    auto center = testing::random_vector(rng, dim);
    centers.push_back(center);
    data.taxonomy.add({testing::label_name(i), "", "cluster topic", center});
  }
  data.index = SemanticIndex::build(data.taxonomy);

  std::normal_distribution<float> gaussian(0.0f, 1.0f);
  auto make_doc = [&](const std::string& id) {
    const std::size_t cluster = rng() % n_labels;
    EmbeddingVector vec;
    vec.values.resize(dim);
    const double center_norm = l2_norm(centers[cluster]);
    for (std::size_t j = 0; j < dim; ++j) {
      vec.values[j] = static_cast<float>(centers[cluster].values[j] / center_norm +
                                         noise * gaussian(rng));
    }
    DocumentRecord doc;
    doc.id = id;
    doc.gold_labels = std::set<LabelId>{testing::label_name(cluster)};
    doc.embedding = vec;
    return doc;
  };
  for (std::size_t i = 0; i < n_train; ++i) data.train.push_back(make_doc("tr-" + std::to_string(i)));
  for (std::size_t i = 0; i < n_val; ++i) data.val.push_back(make_doc("va-" + std::to_string(i)));
  for (std::size_t i = 0; i < n_test; ++i) data.test.push_back(make_doc("te-" + std::to_string(i)));
  return data;
}

TEST(Acceptance, C8_ScalingHarnessShape) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = make_clusters(25, 3000, 300, 500, 32, 0.35, 0xC8);

  ScalingSpec spec;
  spec.sizes = {100, 500, 1000, 2000};
  spec.seed = 11;
  spec.base.strategy = Strategy::NeighborVote;
  spec.base.k = 1;
  spec.k_grid = {1, 2, 3, 5, 8, 13, 20};

  const auto vote_report = run_scaling(data.train, data.val, data.test, data.taxonomy,
                                       data.index, spec);
  ASSERT_EQ(vote_report.points.size(), 4u);
  int inversions = 0;
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < vote_report.points.size(); ++i) {
    const double delta = vote_report.points[i].micro_f1 - vote_report.points[i - 1].micro_f1;
    if (delta < 0) {
      ++inversions;
      worst_drop = std::min(worst_drop, delta);
    }
  }
  EXPECT_LE(inversions, 1);
  EXPECT_GE(worst_drop, -0.005);  // at most half an F1 point of sampling noise

  ScalingSpec flat = spec;
  flat.base.strategy = Strategy::LabelSimilarity;
  const auto sim_report = run_scaling(data.train, data.val, data.test, data.taxonomy,
                                      data.index, flat);
  for (std::size_t i = 1; i < sim_report.points.size(); ++i) {
    ASSERT_EQ(sim_report.points[i].micro_f1, sim_report.points[0].micro_f1);
    ASSERT_EQ(sim_report.points[i].macro_f1, sim_report.points[0].macro_f1);
    ASSERT_EQ(sim_report.points[i].best_k, sim_report.points[0].best_k);
  }

  const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
      std::chrono::steady_clock::now() - start);
  EXPECT_LT(elapsed.count(), 300);
  char shape[128];
  std::snprintf(shape, sizeof shape, "%.4f -> %.4f -> %.4f -> %.4f",
                vote_report.points[0].micro_f1, vote_report.points[1].micro_f1,
                vote_report.points[2].micro_f1, vote_report.points[3].micro_f1);
  report(8, "neighbor-vote F1 non-decreasing across N (" + std::string(shape) +
                "), label-similarity exactly flat, " + std::to_string(elapsed.count()) +
                "s < 5min");
}

// --- criterion 9: format stability and reproducible CLI runs ------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("SOURCE_DATE_EPOCH=1750000000 ") + RETAG_CLI_BIN + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Acceptance, C9_FormatStability) {
  std::mt19937_64 rng(0xC9);
  testing::TempDir dir("c9");

  // vector file: write -> load -> write is byte-identical
  std::vector<VectorRecord> records;
  for (int i = 0; i < 64; ++i)
    records.push_back({"rec-" + std::to_string(i), testing::random_vector(rng, 24)});
  write_vector_file(dir.file("a.txve"), records);
  write_vector_file(dir.file("b.txve"), load_vector_file(dir.file("a.txve")));
  ASSERT_EQ(slurp(dir.file("a.txve")), slurp(dir.file("b.txve")));

  // index store: save -> load -> save is byte-identical
  const auto taxonomy = testing::random_taxonomy(rng, 30, 16);
  const auto index = SemanticIndex::build(taxonomy);
  save_index(dir.file("idx"), index, taxonomy);
  const auto loaded = load_index(dir.file("idx"));
  save_index(dir.file("idx2"), loaded.index, loaded.taxonomy);
  for (const auto* name : {"/taxonomy.jsonl", "/vectors.txve", "/meta.json"}) {
    ASSERT_EQ(slurp(dir.file("idx") + name), slurp(dir.file("idx2") + name)) << name;
  }

  // CLI: identical inputs and seed give byte-identical outputs and manifests
  std::ofstream tax(dir.file("taxonomy.jsonl"));
  std::vector<VectorRecord> label_vecs;
  std::vector<VectorRecord> doc_vecs;
  std::ofstream docs(dir.file("docs.jsonl"));
  for (std::size_t i = 0; i < 8; ++i) {
    tax << json{{"id", testing::label_name(i)},
                {"name", "L" + std::to_string(i)},
                {"description", "fixture topic " + std::to_string(i)}}
               .dump()
        << "\n";
    label_vecs.push_back({testing::label_name(i), testing::random_vector(rng, 12)});
  }
  for (std::size_t d = 0; d < 40; ++d) {
    docs << json{{"id", "doc-" + std::to_string(d)},
                 {"text", "body " + std::to_string(d)},
                 {"labels", json::array({testing::label_name(d % 8)})}}
                .dump()
         << "\n";
    doc_vecs.push_back({"doc-" + std::to_string(d), testing::random_vector(rng, 12)});
  }
  tax.close();
  docs.close();
  write_vector_file(dir.file("labels.txve"), label_vecs);
  write_vector_file(dir.file("docs.txve"), doc_vecs);

  const std::string build_args = "index-build --taxonomy " + dir.file("taxonomy.jsonl") +
                                 " --source " + dir.file("labels.txve") + " --out " +
                                 dir.file("cli_idx");
  ASSERT_EQ(run_cli(build_args), 0);
  std::map<std::string, std::string> first_build;
  for (const auto* name : {"/taxonomy.jsonl", "/vectors.txve", "/meta.json", "/manifest.json"})
    first_build[name] = slurp(dir.file("cli_idx") + name);
  ASSERT_EQ(run_cli(build_args), 0);
  for (const auto& [name, bytes] : first_build) {
    ASSERT_EQ(bytes, slurp(dir.file("cli_idx") + name)) << name;
  }

  const std::string predict_args = "predict --index " + dir.file("cli_idx") + " --docs " +
                                   dir.file("docs.jsonl") + " --source " + dir.file("docs.txve") +
                                   " --k 3 --seed 42 --out " + dir.file("p.jsonl");
  ASSERT_EQ(run_cli(predict_args), 0);
  const std::string first_preds = slurp(dir.file("p.jsonl"));
  const std::string first_manifest = slurp(dir.file("p.jsonl") + ".manifest.json");
  ASSERT_EQ(run_cli(predict_args), 0);
  ASSERT_NE(first_preds, "");
  ASSERT_EQ(first_preds, slurp(dir.file("p.jsonl")));
  ASSERT_EQ(first_manifest, slurp(dir.file("p.jsonl") + ".manifest.json"));

  report(9, "vector-file and index round-trips byte-identical; repeated CLI runs "
            "byte-identical including manifests");
}

}  // namespace
}  // namespace retag
