// retag: retrieval-based multi-label annotation over closed taxonomies.
//
// Subcommands: index-build, embed, predict, tune, evaluate, audit, stats,
// cost, scaling, serve. Every command that writes a primary output also
// writes a manifest (resolved config, input digests, seed, tool version)
// next to it. Reports are dual-emitted: a human table on stdout and JSON
// behind --out.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "retag/annotator.hpp"
#include "retag/audit.hpp"
#include "retag/cost_model.hpp"
#include "retag/dataset.hpp"
#include "retag/errors.hpp"
#include "retag/gateway.hpp"
#include "retag/index_store.hpp"
#include "retag/label_index.hpp"
#include "retag/manifest.hpp"
#include "retag/metrics.hpp"
#include "retag/predictions_io.hpp"
#include "retag/scaling.hpp"
#include "retag/service.hpp"
#include "retag/tuner.hpp"
#include "retag/types.hpp"
#include "retag/version.hpp"

namespace {

using retag::json;

// ---------------------------------------------------------------------------
// embedding source options shared by the commands that need vectors

struct SourceOptions {
  std::string source;       // URL (http/https) or a .txve vector file
  std::string model;
  std::string cache_dir;
  std::string auth_token;
  std::string prefix;
  std::size_t expected_dim = 0;
  int batch_size = 16;
  double timeout = 30.0;
  int max_retries = 3;
};

void add_source_options(CLI::App* cmd, SourceOptions& opts, bool required) {
  auto* src = cmd->add_option("--source", opts.source,
                              "embedding source: service URL or .txve vector file");
  src->envname("RETAG_EMBED_URL");
  if (required) src->required();
  cmd->add_option("--model", opts.model, "embedding model name sent to the service")
      ->envname("RETAG_EMBED_MODEL");
  cmd->add_option("--cache-dir", opts.cache_dir, "persistent embedding cache directory")
      ->envname("RETAG_CACHE_DIR");
  cmd->add_option("--auth-token", opts.auth_token, "bearer token for the embedding service")
      ->envname("RETAG_EMBED_TOKEN");
  cmd->add_option("--embed-prefix", opts.prefix,
                  "instruction prefix prepended to every text before embedding");
  cmd->add_option("--expected-dim", opts.expected_dim, "reject embeddings of any other dimension");
  cmd->add_option("--batch-size", opts.batch_size, "texts per embedding request");
  cmd->add_option("--timeout", opts.timeout, "embedding request timeout in seconds");
  cmd->add_option("--max-retries", opts.max_retries, "retries for transient service failures");
}

bool looks_like_url(const std::string& s) {
  return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

retag::EmbeddingSource make_source(const SourceOptions& opts) {
  std::optional<std::size_t> dim;
  if (opts.expected_dim > 0) dim = opts.expected_dim;
  if (looks_like_url(opts.source)) {
    retag::RemoteServiceConfig remote;
    remote.base_url = opts.source;
    remote.model_name = opts.model;
    remote.batch_size = opts.batch_size;
    remote.timeout_sec = opts.timeout;
    remote.max_retries = opts.max_retries;
    remote.auth_token = opts.auth_token;
    remote.instruction_prefix = opts.prefix;
    return retag::EmbeddingSource::remote_service(remote, dim);
  }
  return retag::EmbeddingSource::vector_file(opts.source, dim);
}

retag::EmbeddingGateway make_gateway(const SourceOptions& opts) {
  return retag::EmbeddingGateway(make_source(opts), opts.cache_dir);
}

json source_config_json(const SourceOptions& opts) {
  return json{{"source", opts.source},           {"model", opts.model},
              {"cache_dir", opts.cache_dir},     {"embed_prefix", opts.prefix},
              {"expected_dim", opts.expected_dim}, {"batch_size", opts.batch_size},
              {"timeout", opts.timeout},         {"max_retries", opts.max_retries}};
}

// ---------------------------------------------------------------------------
// small helpers

std::string pct2(double unit_score) {  // 0.7625 -> "76.25"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", unit_score * 100.0);
  return buf;
}

std::string flops_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::vector<int> parse_k_grid(const std::string& text) {
  std::vector<int> grid;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    for (int k = lo; k <= hi; ++k) grid.push_back(k);
    return grid;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    grid.push_back(std::stoi(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return grid;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    sizes.push_back(static_cast<std::size_t>(std::stoull(text.substr(pos, comma - pos))));
    pos = comma + 1;
  }
  return sizes;
}

void write_json_report(const std::string& path, const json& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) retag::fail(retag::Errc::IoError, "cannot open '" + path + "' for writing");
  out << report.dump(2) << "\n";
}

// Manifest path: <out>.manifest.json for file outputs, <out>/manifest.json
// for directory outputs.
void emit_manifest(const std::string& out_path, bool out_is_dir, const std::string& command,
                   const json& config, const std::vector<std::string>& inputs,
                   std::uint64_t seed) {
  retag::RunManifest manifest;
  manifest.command = command;
  manifest.config = config;
  manifest.seed = seed;
  manifest.timestamp = retag::manifest_timestamp();
  for (const auto& path : inputs) manifest.input_digests[path] = retag::sha256_file(path);
  const std::string manifest_path =
      out_is_dir ? (std::filesystem::path(out_path) / "manifest.json").string()
                 : out_path + ".manifest.json";
  retag::write_manifest(manifest_path, manifest);
}

std::map<std::string, retag::Strategy> strategy_names() {
  return {{"label-sim", retag::Strategy::LabelSimilarity},
          {"neighbor-vote", retag::Strategy::NeighborVote}};
}

std::map<std::string, retag::Objective> objective_names() {
  return {{"micro-f1", retag::Objective::MicroF1}, {"macro-f1", retag::Objective::MacroF1}};
}

std::map<std::string, retag::MacroUniverse> universe_names() {
  return {{"gold", retag::MacroUniverse::GoldSupported},
          {"all", retag::MacroUniverse::FullTaxonomy}};
}

const char* strategy_str(retag::Strategy s) {
  return s == retag::Strategy::LabelSimilarity ? "label-sim" : "neighbor-vote";
}

const char* universe_str(retag::MacroUniverse u) {
  return u == retag::MacroUniverse::GoldSupported ? "gold" : "all";
}

// Documents for embedding export: labels are irrelevant, so no taxonomy
// validation here.
std::vector<std::pair<std::string, std::string>> load_id_text_pairs(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> items;
  retag::detail::for_each_jsonl_line(path, [&](std::size_t line_no, const json& obj) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object()) retag::fail(retag::Errc::MalformedLine, where + ": expected an object");
    items.emplace_back(retag::detail::require_string(obj, "id", where),
                       obj.value("text", std::string{}));
  });
  return items;
}

json eval_report_json(const retag::EvalReport& report) {
  json per_label = json::array();
  for (const auto& s : report.per_label) {
    per_label.push_back({{"label", s.label},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"f1", s.f1},
                         {"support", s.support}});
  }
  return json{{"n_docs", report.n_docs},
              {"micro", {{"precision", report.micro_p}, {"recall", report.micro_r}, {"f1", report.micro_f1}}},
              {"macro", {{"precision", report.macro_p}, {"recall", report.macro_r}, {"f1", report.macro_f1}}},
              {"per_label", per_label}};
}

void print_eval_report(const retag::EvalReport& report) {
  std::printf("documents   %zu\n", report.n_docs);
  std::printf("%-8s %8s %8s %8s\n", "", "P", "R", "F1");
  std::printf("%-8s %8s %8s %8s\n", "micro", pct2(report.micro_p).c_str(),
              pct2(report.micro_r).c_str(), pct2(report.micro_f1).c_str());
  std::printf("%-8s %8s %8s %8s\n", "macro", pct2(report.macro_p).c_str(),
              pct2(report.macro_r).c_str(), pct2(report.macro_f1).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-based multi-label annotation engine"};
  app.set_version_flag("--version", std::string(retag::kToolVersion));
  app.set_config("--config", "", "read options from an INI/TOML file");
  app.require_subcommand(1);

  // ---- index-build ---------------------------------------------------------
  auto* index_build = app.add_subcommand("index-build", "embed a taxonomy and persist the index");
  struct {
    std::string taxonomy;
    std::string out;
    SourceOptions source;
  } ib;
  index_build->add_option("--taxonomy", ib.taxonomy, "taxonomy.jsonl (id, name, description)")
      ->required()
      ->check(CLI::ExistingFile);
  index_build->add_option("--out", ib.out, "output index directory")->required();
  add_source_options(index_build, ib.source, /*required=*/true);
  index_build->callback([&] {
    const retag::Taxonomy taxonomy = retag::load_taxonomy(ib.taxonomy);
    auto gateway = make_gateway(ib.source);
    const retag::Taxonomy embedded = retag::with_label_embeddings(taxonomy, gateway);
    const retag::SemanticIndex index = retag::SemanticIndex::build(embedded);
    retag::save_index(ib.out, index, taxonomy);
    std::vector<std::string> inputs{ib.taxonomy};
    if (!looks_like_url(ib.source.source)) inputs.push_back(ib.source.source);
    emit_manifest(ib.out, true, "index-build",
                  json{{"taxonomy", ib.taxonomy}, {"out", ib.out},
                       {"source", source_config_json(ib.source)}},
                  inputs, 0);
    const auto stats = index.stats();
    std::printf("index written to %s: %zu labels, dim %zu, version %llu\n", ib.out.c_str(),
                stats.count, stats.dim, static_cast<unsigned long long>(stats.version));
  });

  // ---- embed ---------------------------------------------------------------
  auto* embed = app.add_subcommand("embed", "precompute vectors for documents or label descriptions");
  struct {
    std::string docs;
    std::string taxonomy;
    std::string out;
    SourceOptions source;
  } em;
  auto* em_docs = embed->add_option("--docs", em.docs, "documents.jsonl to embed (by text)")
                      ->check(CLI::ExistingFile);
  embed->add_option("--taxonomy", em.taxonomy, "taxonomy.jsonl to embed (by description)")
      ->check(CLI::ExistingFile)
      ->excludes(em_docs);
  embed->add_option("--out", em.out, "output .txve vector file")->required();
  add_source_options(embed, em.source, /*required=*/true);
  embed->callback([&] {
    std::vector<std::pair<std::string, std::string>> items;
    std::string input;
    if (!em.docs.empty()) {
      items = load_id_text_pairs(em.docs);
      input = em.docs;
    } else if (!em.taxonomy.empty()) {
      const retag::Taxonomy taxonomy = retag::load_taxonomy(em.taxonomy);
      for (const auto& e : taxonomy.entries()) items.emplace_back(e.id, e.description);
      input = em.taxonomy;
    } else {
      retag::fail(retag::Errc::IoError, "embed needs --docs or --taxonomy");
    }
    auto gateway = make_gateway(em.source);
    std::vector<std::string> texts;
    texts.reserve(items.size());
    for (const auto& [id, text] : items) texts.push_back(text);
    const auto vectors = gateway.embed_texts(texts);
    std::vector<retag::VectorRecord> records;
    records.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) records.push_back({items[i].first, vectors[i]});
    retag::write_vector_file(em.out, records);
    emit_manifest(em.out, false, "embed",
                  json{{"input", input}, {"out", em.out}, {"source", source_config_json(em.source)}},
                  {input}, 0);
    std::printf("wrote %zu vectors to %s\n", records.size(), em.out.c_str());
  });

  // ---- predict --------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "annotate documents against a persisted index");
  struct {
    std::string index_dir;
    std::string docs;
    std::string out;
    std::string corpus;
    std::string corpus_vectors;
    retag::Strategy strategy = retag::Strategy::LabelSimilarity;
    int k = 5;
    int vote_neighbors = 10;
    double threshold = 0.0;
    bool thresholded = false;
    bool lenient = false;
    std::uint64_t seed = 0;
    SourceOptions source;
  } pr;
  predict->add_option("--index", pr.index_dir, "index directory")->required();
  predict->add_option("--docs", pr.docs, "documents.jsonl to annotate")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", pr.out, "predictions.jsonl output")->required();
  predict->add_option("--strategy", pr.strategy, "label-sim or neighbor-vote")
      ->transform(CLI::CheckedTransformer(strategy_names(), CLI::ignore_case));
  predict->add_option("--k", pr.k, "labels per document (label-sim)");
  predict->add_option("--vote-neighbors", pr.vote_neighbors,
                      "training documents consulted (neighbor-vote)");
  auto* thr = predict->add_option("--threshold", pr.threshold,
                                  "keep labels scoring at least this instead of a fixed k");
  predict->add_option("--corpus", pr.corpus, "training documents.jsonl (neighbor-vote)")
      ->check(CLI::ExistingFile);
  predict->add_option("--corpus-vectors", pr.corpus_vectors,
                      "vector file for the training corpus (neighbor-vote)")
      ->check(CLI::ExistingFile);
  predict->add_flag("--lenient", pr.lenient,
                    "skip documents that cannot be embedded or predicted");
  predict->add_option("--seed", pr.seed, "recorded in the manifest");
  add_source_options(predict, pr.source, /*required=*/true);
  predict->callback([&] {
    pr.thresholded = thr->count() > 0;
    retag::StoredIndex stored = retag::load_index(pr.index_dir);

    retag::LoadOptions load_opts{pr.lenient};
    std::vector<retag::LoadIssue> issues;
    auto docs = retag::load_documents(pr.docs, stored.taxonomy, load_opts, &issues);
    auto gateway = make_gateway(pr.source);
    retag::attach_document_embeddings(docs, gateway, pr.lenient, &issues);

    retag::AnnotatorConfig config;
    config.strategy = pr.strategy;
    config.k = pr.k;
    config.vote_neighbors = pr.vote_neighbors;
    if (pr.thresholded) {
      config.rule = retag::OutputSizeRule::ThresholdedScore;
      config.threshold = pr.threshold;
    }

    retag::TrainingCorpusIndex corpus;
    if (pr.strategy == retag::Strategy::NeighborVote) {
      if (pr.corpus.empty() || pr.corpus_vectors.empty())
        retag::fail(retag::Errc::EmptyCorpus,
                    "neighbor-vote needs --corpus and --corpus-vectors");
      auto corpus_docs = retag::load_documents(pr.corpus, stored.taxonomy);
      retag::EmbeddingGateway corpus_gateway(
          retag::EmbeddingSource::vector_file(pr.corpus_vectors));
      retag::attach_document_embeddings(corpus_docs, corpus_gateway);
      corpus = retag::TrainingCorpusIndex::build(corpus_docs, stored.taxonomy);
    }

    std::vector<std::pair<std::string, retag::EmbeddingVector>> queries;
    queries.reserve(docs.size());
    for (const auto& d : docs) queries.emplace_back(d.id, *d.embedding);
    const retag::BatchResult result = retag::predict_batch(
        queries, &stored.index, corpus.empty() ? nullptr : &corpus, config,
        retag::BatchOptions{pr.lenient});
    retag::write_predictions(pr.out, result.predictions);

    for (const auto& issue : issues)
      std::fprintf(stderr, "retag: skipped: %s\n", issue.message.c_str());
    for (const auto& err : result.errors)
      std::fprintf(stderr, "retag: skipped doc '%s': %s\n", err.doc_id.c_str(),
                   err.message.c_str());

    std::vector<std::string> inputs{pr.docs};
    if (!looks_like_url(pr.source.source)) inputs.push_back(pr.source.source);
    if (!pr.corpus.empty()) inputs.push_back(pr.corpus);
    if (!pr.corpus_vectors.empty()) inputs.push_back(pr.corpus_vectors);
    emit_manifest(pr.out, false, "predict",
                  json{{"index", pr.index_dir},
                       {"docs", pr.docs},
                       {"out", pr.out},
                       {"strategy", strategy_str(pr.strategy)},
                       {"k", pr.k},
                       {"vote_neighbors", pr.vote_neighbors},
                       {"thresholded", pr.thresholded},
                       {"threshold", pr.threshold},
                       {"lenient", pr.lenient},
                       {"source", source_config_json(pr.source)}},
                  inputs, pr.seed);
    std::printf("wrote %zu predictions to %s (%zu skipped)\n", result.predictions.size(),
                pr.out.c_str(), issues.size() + result.errors.size());
  });

  // ---- tune ------------------------------------------------------------------
  auto* tune = app.add_subcommand("tune", "select k on a validation split");
  struct {
    std::string index_dir;
    std::string val_docs;
    std::string out;
    std::string corpus;
    std::string corpus_vectors;
    retag::Strategy strategy = retag::Strategy::LabelSimilarity;
    std::string k_grid = "1..20";
    retag::Objective objective = retag::Objective::MicroF1;
    SourceOptions source;
  } tn;
  tune->add_option("--index", tn.index_dir, "index directory")->required();
  tune->add_option("--val-docs", tn.val_docs, "validation documents.jsonl with gold labels")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--k-grid", tn.k_grid, "candidates: \"1..20\" or \"5,10,15\"");
  tune->add_option("--objective", tn.objective, "micro-f1 or macro-f1")
      ->transform(CLI::CheckedTransformer(objective_names(), CLI::ignore_case));
  tune->add_option("--strategy", tn.strategy, "label-sim or neighbor-vote")
      ->transform(CLI::CheckedTransformer(strategy_names(), CLI::ignore_case));
  tune->add_option("--corpus", tn.corpus, "training documents.jsonl (neighbor-vote)")
      ->check(CLI::ExistingFile);
  tune->add_option("--corpus-vectors", tn.corpus_vectors,
                   "vector file for the training corpus (neighbor-vote)")
      ->check(CLI::ExistingFile);
  tune->add_option("--out", tn.out, "tuning report JSON output");
  add_source_options(tune, tn.source, /*required=*/true);
  tune->callback([&] {
    retag::StoredIndex stored = retag::load_index(tn.index_dir);
    auto val = retag::load_documents(tn.val_docs, stored.taxonomy);
    auto gateway = make_gateway(tn.source);
    retag::attach_document_embeddings(val, gateway);

    retag::TuningSpec spec;
    spec.k_grid = parse_k_grid(tn.k_grid);
    spec.objective = tn.objective;
    spec.base.strategy = tn.strategy;

    retag::TrainingCorpusIndex corpus;
    const retag::TrainingCorpusIndex* corpus_ptr = nullptr;
    if (spec.base.strategy == retag::Strategy::NeighborVote) {
      if (tn.corpus.empty() || tn.corpus_vectors.empty())
        retag::fail(retag::Errc::EmptyCorpus, "neighbor-vote needs --corpus and --corpus-vectors");
      auto corpus_docs = retag::load_documents(tn.corpus, stored.taxonomy);
      retag::EmbeddingGateway corpus_gateway(
          retag::EmbeddingSource::vector_file(tn.corpus_vectors));
      retag::attach_document_embeddings(corpus_docs, corpus_gateway);
      corpus = retag::TrainingCorpusIndex::build(corpus_docs, stored.taxonomy);
      corpus_ptr = &corpus;
    }

    const retag::TuningReport report =
        retag::tune_k(val, stored.index, corpus_ptr, spec, stored.taxonomy);

    std::printf("%-6s %10s %10s\n", "k", "micro-f1", "macro-f1");
    for (const auto& row : report.per_k)
      std::printf("%-6d %10s %10s\n", row.k, pct2(row.micro_f1).c_str(),
                  pct2(row.macro_f1).c_str());
    std::printf("best k: %d (objective %s)\n", report.best_k,
                retag::objective_name(report.objective_used));

    if (!tn.out.empty()) {
      json per_k = json::array();
      for (const auto& row : report.per_k)
        per_k.push_back({{"k", row.k}, {"micro_f1", row.micro_f1}, {"macro_f1", row.macro_f1}});
      write_json_report(tn.out, json{{"best_k", report.best_k},
                                     {"objective", retag::objective_name(report.objective_used)},
                                     {"per_k", per_k}});
      emit_manifest(tn.out, false, "tune",
                    json{{"index", tn.index_dir},
                         {"val_docs", tn.val_docs},
                         {"k_grid", tn.k_grid},
                         {"objective", retag::objective_name(tn.objective)},
                         {"strategy", strategy_str(tn.strategy)},
                         {"source", source_config_json(tn.source)}},
                    {tn.val_docs}, 0);
    }
  });

  // ---- evaluate ---------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold labels");
  struct {
    std::string preds;
    std::string gold;
    std::string taxonomy;
    retag::MacroUniverse universe = retag::MacroUniverse::GoldSupported;
    std::string out;
  } ev;
  evaluate->add_option("--preds", ev.preds, "predictions.jsonl")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gold", ev.gold, "documents.jsonl with gold labels")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--taxonomy", ev.taxonomy, "taxonomy.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--macro-universe", ev.universe,
                       "macro average over: gold (gold-supported labels) or all (full taxonomy)")
      ->transform(CLI::CheckedTransformer(universe_names(), CLI::ignore_case));
  evaluate->add_option("--out", ev.out, "evaluation report JSON output");
  evaluate->callback([&] {
    const retag::Taxonomy taxonomy = retag::load_taxonomy(ev.taxonomy);
    const auto gold = retag::load_documents(ev.gold, taxonomy);
    const auto preds = retag::read_predictions(ev.preds);
    const retag::EvalReport report =
        retag::evaluate(preds, gold, taxonomy, ev.universe);
    print_eval_report(report);
    if (!ev.out.empty()) {
      write_json_report(ev.out, eval_report_json(report));
      emit_manifest(ev.out, false, "evaluate",
                    json{{"preds", ev.preds},
                         {"gold", ev.gold},
                         {"taxonomy", ev.taxonomy},
                         {"macro_universe", universe_str(ev.universe)}},
                    {ev.preds, ev.gold, ev.taxonomy}, 0);
    }
  });

  // ---- audit --------------------------------------------------------------------
  auto* audit = app.add_subcommand("audit", "flag predicted labels outside the taxonomy");
  struct {
    std::string preds;
    std::string taxonomy;
    std::string out;
    std::size_t top = 10;
    std::size_t show_offending = 5;
  } au;
  audit->add_option("--preds", au.preds, "predictions.jsonl (engine or third-party)")
      ->required()
      ->check(CLI::ExistingFile);
  audit->add_option("--taxonomy", au.taxonomy, "taxonomy.jsonl")->required()->check(CLI::ExistingFile);
  audit->add_option("--top", au.top, "how many top invalid labels to print");
  audit->add_option("--out", au.out, "audit report JSON output");
  audit->callback([&] {
    const retag::Taxonomy taxonomy = retag::load_taxonomy(au.taxonomy);
    const retag::AuditReport report = retag::audit_predictions(au.preds, taxonomy);
    std::printf("samples                 %zu\n", report.n_samples);
    std::printf("hallucinating samples   %zu\n", report.n_hallucinating_samples);
    std::printf("rate                    %s\n", retag::format_rate(report.rate).c_str());
    std::printf("label instances         %zu (invalid: %zu, rate %s)\n", report.n_label_instances,
                report.n_invalid_label_instances, retag::format_rate(report.label_rate).c_str());
    if (!report.top_hallucinated.empty()) {
      std::printf("top invalid labels:\n");
      for (std::size_t i = 0; i < report.top_hallucinated.size() && i < au.top; ++i)
        std::printf("  %-40s %zu\n", report.top_hallucinated[i].first.c_str(),
                    report.top_hallucinated[i].second);
    }
    for (std::size_t i = 0; i < report.offending.size() && i < au.show_offending; ++i) {
      const auto& off = report.offending[i];
      std::printf("  doc %s: '%s' (nearest valid: '%s')\n", off.doc_id.c_str(), off.label.c_str(),
                  off.nearest_valid.c_str());
    }
    if (!au.out.empty()) {
      json top = json::array();
      for (const auto& [label, count] : report.top_hallucinated)
        top.push_back({{"label", label}, {"count", count}});
      json offending = json::array();
      for (const auto& off : report.offending)
        offending.push_back({{"doc_id", off.doc_id},
                             {"label", off.label},
                             {"nearest_valid", off.nearest_valid}});
      write_json_report(au.out,
                        json{{"n_samples", report.n_samples},
                             {"n_hallucinating_samples", report.n_hallucinating_samples},
                             {"rate", report.rate},
                             {"rate_display", retag::format_rate(report.rate)},
                             {"n_label_instances", report.n_label_instances},
                             {"n_invalid_label_instances", report.n_invalid_label_instances},
                             {"label_rate", report.label_rate},
                             {"top_hallucinated", top},
                             {"offending", offending}});
      emit_manifest(au.out, false, "audit",
                    json{{"preds", au.preds}, {"taxonomy", au.taxonomy}},
                    {au.preds, au.taxonomy}, 0);
    }
  });

  // ---- stats ----------------------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "corpus statistics");
  struct {
    std::string docs;
    std::string taxonomy;
    std::string out;
  } st;
  stats->add_option("--docs", st.docs, "documents.jsonl with gold labels")
      ->required()
      ->check(CLI::ExistingFile);
  stats->add_option("--taxonomy", st.taxonomy, "taxonomy.jsonl")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", st.out, "stats JSON output");
  stats->callback([&] {
    const retag::Taxonomy taxonomy = retag::load_taxonomy(st.taxonomy);
    const auto docs = retag::load_documents(st.docs, taxonomy);
    const retag::CorpusStats cs = retag::corpus_stats(docs, taxonomy);
    std::printf("documents            %zu\n", cs.n_docs);
    std::printf("label cardinality    %zu\n", cs.cardinality);
    std::printf("avg labels per doc   %.2f\n", cs.avg_labels_per_doc);
    if (!st.out.empty()) {
      json support = json::object();
      for (const auto& [label, count] : cs.label_support) support[label] = count;
      write_json_report(st.out, json{{"n_docs", cs.n_docs},
                                     {"cardinality", cs.cardinality},
                                     {"avg_labels_per_doc", cs.avg_labels_per_doc},
                                     {"label_support", support}});
      emit_manifest(st.out, false, "stats",
                    json{{"docs", st.docs}, {"taxonomy", st.taxonomy}},
                    {st.docs, st.taxonomy}, 0);
    }
  });

  // ---- cost -----------------------------------------------------------------------
  auto* cost = app.add_subcommand("cost", "analytical FLOPs comparison: fine-tuning vs retrieval");
  struct {
    std::string ft_preset = "lora-ft";
    std::string ret_preset = "retrieval";
    std::string out;
    bool full_table = false;
    double ft_n_params = 0, ft_samples = 0, ft_epochs = 0, ft_seq_len = 0;
    double ret_n_params = 0, ret_test_samples = 0, ret_seq_len = 0;
  } co;
  cost->add_option("--ft-preset", co.ft_preset, "fine-tuning preset: full-ft or lora-ft");
  cost->add_option("--ret-preset", co.ret_preset, "retrieval preset: retrieval");
  cost->add_flag("--reference-table", co.full_table,
                 "print the full reference comparison (all presets)");
  cost->add_option("--ft-n-params", co.ft_n_params, "override: fine-tuned model parameters");
  cost->add_option("--ft-samples", co.ft_samples, "override: training samples");
  cost->add_option("--ft-epochs", co.ft_epochs, "override: training epochs");
  cost->add_option("--ft-seq-len", co.ft_seq_len, "override: fine-tuning sequence length");
  cost->add_option("--ret-n-params", co.ret_n_params, "override: retrieval model parameters");
  cost->add_option("--ret-test-samples", co.ret_test_samples, "override: inference samples");
  cost->add_option("--ret-seq-len", co.ret_seq_len, "override: retrieval sequence length");
  cost->add_option("--out", co.out, "cost report JSON output");
  cost->callback([&] {
    auto resolve = [](const std::string& name) {
      auto preset = retag::cost_preset(name);
      if (!preset)
        retag::fail(retag::Errc::NonPositiveParam, "unknown cost preset '" + name + "'");
      return *preset;
    };
    retag::CostParams ft = resolve(co.ft_preset);
    if (co.ft_n_params > 0) ft.n_params = co.ft_n_params;
    if (co.ft_samples > 0) ft.s_samples = co.ft_samples;
    if (co.ft_epochs > 0) ft.e_epochs = co.ft_epochs;
    if (co.ft_seq_len > 0) ft.l_seq = co.ft_seq_len;
    retag::CostParams ret = resolve(co.ret_preset);
    if (co.ret_n_params > 0) ret.n_params = co.ret_n_params;
    if (co.ret_test_samples > 0) ret.s_test = co.ret_test_samples;
    if (co.ret_seq_len > 0) ret.l_seq = co.ret_seq_len;

    json rows = json::array();
    std::printf("%-12s %12s %10s\n", "method", "flops", "rel.cost");
    auto print_row = [&](const std::string& name, double flops, double rel,
                         const std::string& notes) {
      if (flops == 0.0)
        std::fprintf(stderr, "retag: warning: %s evaluates to zero FLOPs (degenerate parameters)\n",
                     name.c_str());
      char relbuf[32];
      std::snprintf(relbuf, sizeof relbuf, "%.1fx", rel);
      std::printf("%-12s %12s %10s\n", name.c_str(), flops_str(flops).c_str(), relbuf);
      rows.push_back({{"method", name}, {"flops", flops}, {"relative_cost", rel}, {"notes", notes}});
    };
    if (co.full_table) {
      const auto full = resolve("full-ft");
      const auto lora = resolve("lora-ft");
      const double base = retag::flops_retrieval(ret);
      print_row("full-ft", retag::flops_finetune(full), retag::flops_finetune(full) / base,
                full.notes);
      print_row("lora-ft", retag::flops_finetune(lora), retag::flops_finetune(lora) / base,
                lora.notes);
      print_row(co.ret_preset, base, 1.0, ret.notes);
    } else {
      const retag::CostReport report = retag::cost_report(ft, ret);
      print_row(co.ft_preset, report.c_ft, report.ratio, report.ft_notes);
      print_row(co.ret_preset, report.c_ret, 1.0, report.ret_notes);
    }
    if (!co.out.empty()) {
      write_json_report(co.out, json{{"rows", rows}, {"baseline", co.ret_preset}});
      emit_manifest(co.out, false, "cost",
                    json{{"ft_preset", co.ft_preset}, {"ret_preset", co.ret_preset}}, {}, 0);
    }
  });

  // ---- scaling ---------------------------------------------------------------------
  auto* scaling = app.add_subcommand(
      "scaling", "train-size scaling experiment: subsample, retune, evaluate per size");
  struct {
    std::string docs;
    std::string taxonomy;
    std::string index_dir;
    std::string val_docs;
    std::string test_docs;
    std::string sizes = "100,500,1000,2000";
    retag::Strategy strategy = retag::Strategy::NeighborVote;
    retag::Objective objective = retag::Objective::MicroF1;
    std::string k_grid = "1..20";
    std::string out;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    SourceOptions source;
  } sc;
  scaling->add_option("--docs", sc.docs, "labeled documents.jsonl (training pool)")
      ->required()
      ->check(CLI::ExistingFile);
  scaling->add_option("--taxonomy", sc.taxonomy, "taxonomy.jsonl")->check(CLI::ExistingFile);
  scaling->add_option("--index", sc.index_dir, "label index directory")->required();
  scaling->add_option("--val-docs", sc.val_docs, "fixed validation documents.jsonl")
      ->check(CLI::ExistingFile);
  scaling->add_option("--test-docs", sc.test_docs, "fixed test documents.jsonl")
      ->check(CLI::ExistingFile);
  scaling->add_option("--sizes", sc.sizes, "training sizes, e.g. 100,500,1000,2000");
  scaling->add_option("--strategy", sc.strategy, "label-sim or neighbor-vote")
      ->transform(CLI::CheckedTransformer(strategy_names(), CLI::ignore_case));
  scaling->add_option("--objective", sc.objective, "micro-f1 or macro-f1")
      ->transform(CLI::CheckedTransformer(objective_names(), CLI::ignore_case));
  scaling->add_option("--k-grid", sc.k_grid, "tuning grid per size");
  scaling->add_option("--seed", sc.seed, "subsampling / splitting seed");
  scaling->add_option("--train-fraction", sc.train_fraction,
                      "train fraction when splitting --docs internally");
  scaling->add_option("--val-fraction", sc.val_fraction,
                      "validation fraction when splitting --docs internally");
  scaling->add_option("--out", sc.out, "scaling report JSON output");
  add_source_options(scaling, sc.source, /*required=*/true);
  scaling->callback([&] {
    retag::StoredIndex stored = retag::load_index(sc.index_dir);
    const retag::Taxonomy taxonomy =
        sc.taxonomy.empty() ? stored.taxonomy : retag::load_taxonomy(sc.taxonomy);
    auto gateway = make_gateway(sc.source);

    auto pool = retag::load_documents(sc.docs, taxonomy);
    retag::attach_document_embeddings(pool, gateway);

    std::vector<retag::DocumentRecord> train, val, test;
    if (!sc.val_docs.empty() && !sc.test_docs.empty()) {
      train = std::move(pool);
      val = retag::load_documents(sc.val_docs, taxonomy);
      test = retag::load_documents(sc.test_docs, taxonomy);
      retag::attach_document_embeddings(val, gateway);
      retag::attach_document_embeddings(test, gateway);
    } else {
      retag::SplitSpec split_spec;
      split_spec.seed = sc.seed;
      split_spec.train_fraction = sc.train_fraction;
      split_spec.val_fraction = sc.val_fraction;
      auto split = retag::split_corpus(pool, split_spec);
      train = std::move(split.train);
      val = std::move(split.val);
      test = std::move(split.test);
    }

    retag::ScalingSpec spec;
    spec.sizes = parse_sizes(sc.sizes);
    spec.seed = sc.seed;
    spec.base.strategy = sc.strategy;
    spec.objective = sc.objective;
    spec.k_grid = parse_k_grid(sc.k_grid);

    const retag::ScalingReport report =
        retag::run_scaling(train, val, test, taxonomy, stored.index, spec);

    std::printf("strategy: %s\n", strategy_str(report.strategy));
    std::printf("%-8s %8s %10s %10s\n", "N", "best-k", "micro-f1", "macro-f1");
    for (const auto& p : report.points)
      std::printf("%-8zu %8d %10s %10s\n", p.n_train, p.best_k, pct2(p.micro_f1).c_str(),
                  pct2(p.macro_f1).c_str());

    if (!sc.out.empty()) {
      json points = json::array();
      for (const auto& p : report.points)
        points.push_back({{"n_train", p.n_train},
                          {"best_k", p.best_k},
                          {"micro_f1", p.micro_f1},
                          {"macro_f1", p.macro_f1}});
      write_json_report(sc.out,
                        json{{"strategy", strategy_str(report.strategy)}, {"points", points}});
      emit_manifest(sc.out, false, "scaling",
                    json{{"docs", sc.docs},
                         {"index", sc.index_dir},
                         {"sizes", sc.sizes},
                         {"strategy", strategy_str(sc.strategy)},
                         {"objective", retag::objective_name(sc.objective)},
                         {"k_grid", sc.k_grid},
                         {"train_fraction", sc.train_fraction},
                         {"val_fraction", sc.val_fraction},
                         {"source", source_config_json(sc.source)}},
                    {sc.docs}, sc.seed);
    }
  });

  // ---- serve -----------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "run the HTTP annotation service");
  struct {
    std::string index_dir;
    std::string listen = "127.0.0.1:8080";
    int k = 5;
    SourceOptions source;
  } sv;
  serve->add_option("--index", sv.index_dir, "index directory")->required();
  serve->add_option("--listen", sv.listen, "host:port to listen on")->envname("RETAG_LISTEN");
  serve->add_option("--k", sv.k, "default labels per prediction (tuned k*)");
  add_source_options(serve, sv.source, /*required=*/false);
  serve->callback([&] {
    retag::StoredIndex stored = retag::load_index(sv.index_dir);
    std::shared_ptr<retag::EmbeddingGateway> gateway;
    if (!sv.source.source.empty())
      gateway = std::make_shared<retag::EmbeddingGateway>(make_source(sv.source),
                                                          sv.source.cache_dir);
    const auto colon = sv.listen.rfind(':');
    if (colon == std::string::npos)
      retag::fail(retag::Errc::IoError, "--listen must be host:port");
    const std::string host = sv.listen.substr(0, colon);
    const int port = std::stoi(sv.listen.substr(colon + 1));
    retag::AnnotationService service(std::move(stored.index), std::move(stored.taxonomy),
                                     std::move(gateway), retag::ServiceConfig{sv.k});
    std::printf("listening on %s (labels: %zu)\n", sv.listen.c_str(),
                service.snapshot()->index.size());
    std::fflush(stdout);
    if (!service.listen(host, port))
      retag::fail(retag::Errc::IoError, "cannot listen on " + sv.listen);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const retag::Error& e) {
    std::fprintf(stderr, "retag: error: %s: %s\n", retag::errc_name(e.code()), e.what());
    return static_cast<int>(e.family());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "retag: error: Unexpected: %s\n", e.what());
    return 1;
  }
  return 0;
}
