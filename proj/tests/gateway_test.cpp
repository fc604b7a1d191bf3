#include "retag/gateway.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "retag/errors.hpp"
#include "test_support.hpp"

namespace retag {
namespace {

using testing::StubEmbedServer;
using testing::stub_embedding;

RemoteServiceConfig remote_config(const StubEmbedServer& server) {
  RemoteServiceConfig cfg;
  cfg.base_url = server.url();
  cfg.model_name = "stub-model";
  cfg.batch_size = 16;
  cfg.timeout_sec = 5.0;
  cfg.max_retries = 2;
  cfg.backoff_ms = 1;
  return cfg;
}

TEST(Gateway, EmbedsTextsInOrderWithCommonDimension) {
  StubEmbedServer server;
  EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)));
  const std::vector<std::string> texts{"alpha", "beta", "gamma"};
  const auto vectors = gateway.embed_texts(texts);
  ASSERT_EQ(vectors.size(), 3u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(vectors[i].dim(), server.dim());
    EXPECT_EQ(vectors[i], stub_embedding(texts[i], server.dim()));
  }
}

TEST(Gateway, BatchSizeControlsRequestCount) {
  StubEmbedServer server;
  auto cfg = remote_config(server);
  cfg.batch_size = 2;
  EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
  (void)gateway.embed_texts({"a", "b", "c", "d", "e"});
  EXPECT_EQ(server.calls(), 3);  // 2 + 2 + 1
  EXPECT_EQ(server.texts(), 5);
}

TEST(Gateway, BatchPartitionDoesNotChangeResults) {
  StubEmbedServer server;
  const std::vector<std::string> texts{"one", "two", "three", "four", "five", "six", "seven"};
  std::vector<std::vector<EmbeddingVector>> runs;
  for (int batch : {1, 3, 16}) {
    auto cfg = remote_config(server);
    cfg.batch_size = batch;
    EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
    runs.push_back(gateway.embed_texts(texts));
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(runs[0][i], runs[1][i]);
    EXPECT_EQ(runs[0][i], runs[2][i]);
  }
}

TEST(Gateway, CachedTextIsNotReSent) {
  StubEmbedServer server;
  testing::TempDir cache("cache");
  {
    EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)),
                             cache.str());
    (void)gateway.embed_texts({"alpha"});
  }
  EXPECT_EQ(server.calls(), 1);
  EXPECT_EQ(server.texts(), 1);

  EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)), cache.str());
  const auto vectors = gateway.embed_texts({"alpha", "beta"});
  // alpha came from cache: exactly one more remote call carrying one text
  EXPECT_EQ(server.calls(), 2);
  EXPECT_EQ(server.texts(), 2);
  EXPECT_EQ(vectors[0], stub_embedding("alpha", server.dim()));
  EXPECT_EQ(vectors[1], stub_embedding("beta", server.dim()));
}

TEST(Gateway, CacheOnAndOffProduceIdenticalVectors) {
  StubEmbedServer server;
  testing::TempDir cache("cache");
  EmbeddingGateway cached(EmbeddingSource::remote_service(remote_config(server)), cache.str());
  EmbeddingGateway uncached(EmbeddingSource::remote_service(remote_config(server)));
  const std::vector<std::string> texts{"x", "y", "z"};
  const auto a = cached.embed_texts(texts);
  const auto b = cached.embed_texts(texts);  // second pass: all hits
  const auto c = uncached.embed_texts(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(a[i], c[i]);
  }
}

TEST(Gateway, ModelNameSeparatesCacheKeys) {
  StubEmbedServer server;
  testing::TempDir cache("cache");
  auto cfg = remote_config(server);
  cfg.model_name = "model-a";
  EmbeddingGateway a(EmbeddingSource::remote_service(cfg), cache.str());
  (void)a.embed_texts({"shared text"});
  cfg.model_name = "model-b";
  EmbeddingGateway b(EmbeddingSource::remote_service(cfg), cache.str());
  (void)b.embed_texts({"shared text"});
  EXPECT_EQ(server.calls(), 2);  // no cross-model cache hit
}

TEST(Gateway, RetriesTransientFailures) {
  StubEmbedServer server;
  server.fail_next(2);
  EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)));
  const auto vectors = gateway.embed_texts({"alpha"});
  EXPECT_EQ(vectors.size(), 1u);
  EXPECT_EQ(server.calls(), 3);  // two 503s, then success
}

TEST(Gateway, GivesUpAfterMaxRetries) {
  StubEmbedServer server;
  server.fail_next(10);
  auto cfg = remote_config(server);
  cfg.max_retries = 1;
  EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
  try {
    gateway.embed_texts({"alpha"});
    FAIL() << "expected ServiceUnreachable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ServiceUnreachable);
  }
  EXPECT_EQ(server.calls(), 2);
}

TEST(Gateway, UnreachableHostFails) {
  RemoteServiceConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";  // nothing listens there
  cfg.max_retries = 0;
  cfg.timeout_sec = 1.0;
  cfg.backoff_ms = 1;
  EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
  try {
    gateway.embed_texts({"alpha"});
    FAIL() << "expected ServiceUnreachable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ServiceUnreachable);
  }
}

TEST(Gateway, MalformedResponseRejected) {
  StubEmbedServer server;
  server.set_malformed(true);
  EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)));
  try {
    gateway.embed_texts({"alpha"});
    FAIL() << "expected MalformedResponse";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedResponse);
  }
}

TEST(Gateway, WrongDimensionRejected) {
  StubEmbedServer server;
  server.set_wrong_dim(true);
  EmbeddingGateway gateway(
      EmbeddingSource::remote_service(remote_config(server), server.dim()));
  try {
    gateway.embed_texts({"alpha"});
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Gateway, EmptyTextRejectedBeforeAnyCall) {
  StubEmbedServer server;
  EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)));
  try {
    gateway.embed_texts({"ok", ""});
    FAIL() << "expected EmptyText";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyText);
  }
  EXPECT_EQ(server.calls(), 0);
}

TEST(Gateway, AuthTokenForwardedAsBearer) {
  StubEmbedServer server;
  auto cfg = remote_config(server);
  cfg.auth_token = "sekret";
  EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
  (void)gateway.embed_texts({"alpha"});
  EXPECT_EQ(server.last_auth(), "Bearer sekret");
}

TEST(Gateway, InstructionPrefixChangesWhatIsEmbedded) {
  StubEmbedServer server;
  auto cfg = remote_config(server);
  cfg.instruction_prefix = "query: ";
  EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
  const auto vectors = gateway.embed_texts({"alpha"});
  EXPECT_EQ(vectors[0], stub_embedding("query: alpha", server.dim()));
}

TEST(Gateway, LengthGuardWarnsButNeverTruncates) {
  StubEmbedServer server;
  auto cfg = remote_config(server);
  cfg.warn_above_chars = 8;
  EmbeddingGateway gateway(EmbeddingSource::remote_service(cfg));
  const std::string long_text(50, 'x');
  const auto vectors = gateway.embed_texts({long_text});
  // the full text reached the service untouched
  EXPECT_EQ(vectors[0], stub_embedding(long_text, server.dim()));
}

TEST(Gateway, FileSourceServesByIdAndByText) {
  testing::TempDir dir("vf");
  std::mt19937_64 rng(51);
  const auto v1 = testing::random_vector(rng, 4);
  const auto v2 = testing::random_vector(rng, 4);
  write_vector_file(dir.file("v.txve"), {{"doc-1", v1}, {"some text", v2}});

  EmbeddingGateway gateway(EmbeddingSource::vector_file(dir.file("v.txve")));
  auto by_id = gateway.lookup_id("doc-1");
  ASSERT_TRUE(by_id.has_value());
  EXPECT_EQ(*by_id, v1);
  EXPECT_FALSE(gateway.lookup_id("missing").has_value());

  const auto by_text = gateway.embed_texts({"some text"});
  EXPECT_EQ(by_text[0], v2);
  try {
    gateway.embed_texts({"unknown text"});
    FAIL() << "expected VectorNotFound";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::VectorNotFound);
  }
}

TEST(Gateway, AttachDocumentEmbeddingsJoinsById) {
  testing::TempDir dir("vf");
  std::mt19937_64 rng(52);
  const auto v1 = testing::random_vector(rng, 4);
  write_vector_file(dir.file("v.txve"), {{"d1", v1}});

  std::vector<DocumentRecord> docs;
  docs.push_back({"d1", "text", std::nullopt, std::nullopt});
  docs.push_back({"d2", "text", std::nullopt, std::nullopt});

  EmbeddingGateway strict_gateway(EmbeddingSource::vector_file(dir.file("v.txve")));
  auto copy = docs;
  EXPECT_THROW(attach_document_embeddings(copy, strict_gateway), Error);

  EmbeddingGateway lenient_gateway(EmbeddingSource::vector_file(dir.file("v.txve")));
  std::vector<LoadIssue> issues;
  attach_document_embeddings(docs, lenient_gateway, true, &issues);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].id, "d1");
  EXPECT_EQ(*docs[0].embedding, v1);
  EXPECT_EQ(issues.size(), 1u);
}

TEST(Gateway, WithLabelEmbeddingsCoversWholeTaxonomy) {
  StubEmbedServer server;
  Taxonomy taxonomy;
  taxonomy.add({"A", "A", "first topic"});
  taxonomy.add({"B", "B", "second topic"});
  EmbeddingGateway gateway(EmbeddingSource::remote_service(remote_config(server)));
  const auto embedded = with_label_embeddings(taxonomy, gateway);
  EXPECT_EQ(embedded.version(), taxonomy.version());
  for (const auto& e : embedded.entries()) {
    ASSERT_TRUE(e.embedding.has_value());
    EXPECT_EQ(*e.embedding, stub_embedding(e.description, server.dim()));
  }
}

}  // namespace
}  // namespace retag
