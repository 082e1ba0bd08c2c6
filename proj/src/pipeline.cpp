#include "raglab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "raglab/dense.hpp"
#include "raglab/evaluation.hpp"
#include "raglab/hint.hpp"
#include "raglab/prompt.hpp"

namespace raglab {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string artifact_path(const RunConfig& config, const char* name) {
  return (fs::path(config.output_dir) / name).string();
}

namespace {

void ensure_output_dir(const RunConfig& config) {
  fs::create_directories(config.output_dir);
}

void require_artifact(const std::string& path, const char* producer) {
  if (!fs::exists(path)) {
    throw PipelineError("missing artifact " + path + "; run the " +
                        std::string(producer) + " command first");
  }
}

bool needs_dense_store(const RunConfig& config) {
  const RetrieverKind kind = config.retriever.kind;
  if (kind == RetrieverKind::kDense || kind == RetrieverKind::kRerank) {
    return true;
  }
  if (kind == RetrieverKind::kIdeal) {
    return config.retriever.fallback == RetrieverKind::kDense ||
           config.retriever.fallback == RetrieverKind::kRerank;
  }
  return false;
}

QueryEncoder make_query_encoder(std::shared_ptr<GenerationClient> client) {
  return [client = std::move(client)](const std::string& text) {
    return client->embed_texts({text}).front();
  };
}

std::shared_ptr<GenerationClient> make_embed_client(const RunConfig& config) {
  std::shared_ptr<EmbedBackend> backend = make_embed_backend(config.embedder);
  if (!backend) return nullptr;
  return std::make_shared<GenerationClient>(config.embedder.endpoint, nullptr,
                                            std::move(backend));
}

std::unique_ptr<Retriever> make_retriever_kind(
    RetrieverKind kind, const RunConfig& config,
    const std::shared_ptr<const Corpus>& corpus,
    const std::shared_ptr<GenerationClient>& embed_client) {
  switch (kind) {
    case RetrieverKind::kBm25: {
      const std::string path = artifact_path(config, kSparseIndexArtifact);
      require_artifact(path, "index");
      auto index = std::make_shared<SparseIndex>(load_sparse_index(path));
      return std::make_unique<Bm25Retriever>(std::move(index),
                                             config.retriever.bm25);
    }
    case RetrieverKind::kDense: {
      const std::string path = artifact_path(config, kVectorsArtifact);
      require_artifact(path, "index");
      auto index =
          std::make_shared<DenseIndex>(DenseIndex::build(load_vectors(path)));
      if (!embed_client) {
        throw PipelineError("dense retrieval needs an embedding backend");
      }
      return std::make_unique<DenseRetriever>(std::move(index),
                                              make_query_encoder(embed_client));
    }
    case RetrieverKind::kRerank: {
      const std::string sparse_path =
          artifact_path(config, kSparseIndexArtifact);
      const std::string dense_path = artifact_path(config, kVectorsArtifact);
      require_artifact(sparse_path, "index");
      require_artifact(dense_path, "index");
      auto sparse =
          std::make_shared<SparseIndex>(load_sparse_index(sparse_path));
      auto dense = std::make_shared<DenseIndex>(
          DenseIndex::build(load_vectors(dense_path)));
      if (!embed_client) {
        throw PipelineError("reranking needs an embedding backend");
      }
      return std::make_unique<RerankRetriever>(
          std::move(sparse), std::move(dense), make_query_encoder(embed_client),
          config.retriever.first_stage_depth, config.retriever.bm25);
    }
    case RetrieverKind::kIdeal: {
      return std::make_unique<IdealRetriever>(
          corpus, make_retriever_kind(config.retriever.fallback, config,
                                      corpus, embed_client));
    }
  }
  throw PipelineError("unreachable retriever kind");
}

std::string dataset_hash_from_manifest(const std::string& results_path) {
  const json manifest = read_manifest(results_path);
  try {
    return manifest.at("inputs").at("dataset").at("fnv1a64")
        .get<std::string>();
  } catch (const json::exception&) {
    throw PipelineError("manifest for " + results_path +
                        " does not record a dataset hash");
  }
}

}  // namespace

void save_retrieval_runs(std::vector<RetrievalRun> runs,
                         const std::string& path) {
  std::sort(runs.begin(), runs.end(),
            [](const RetrievalRun& a, const RetrievalRun& b) {
              return a.qa_id < b.qa_id;
            });
  std::ofstream out(path);
  if (!out) {
    throw PipelineError("cannot write retrieval file: " + path);
  }
  for (const RetrievalRun& run : runs) {
    json entries = json::array();
    for (const ScoredEntry& e : run.ranked.entries) {
      entries.push_back(json::array({e.doc_id, e.score}));
    }
    const json obj{{"qa_id", run.qa_id},
                   {"k_requested", run.ranked.k_requested},
                   {"entries", entries}};
    out << obj.dump() << '\n';
  }
}

std::vector<RetrievalRun> load_retrieval_runs(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw PipelineError("cannot open retrieval file: " + path);
  }
  std::vector<RetrievalRun> runs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json obj = json::parse(line);
      RetrievalRun run;
      run.qa_id = obj.at("qa_id").get<std::string>();
      run.ranked.query_id = run.qa_id;
      run.ranked.k_requested = obj.at("k_requested").get<std::size_t>();
      for (const json& entry : obj.at("entries")) {
        run.ranked.entries.push_back(ScoredEntry{
            entry.at(0).get<std::string>(), entry.at(1).get<double>()});
      }
      runs.push_back(std::move(run));
    } catch (const json::exception& e) {
      throw PipelineError(path + ":" + std::to_string(lineno) + ": " +
                          e.what());
    }
  }
  return runs;
}

std::shared_ptr<ChatBackend> make_chat_backend(const GeneratorConfig& config) {
  switch (config.backend) {
    case BackendKind::kHttp:
      return std::make_shared<HttpChatBackend>(config.endpoint.base_url,
                                               config.endpoint.api_key_env,
                                               config.endpoint.timeout_ms);
    case BackendKind::kMockEcho:
      return std::make_shared<EchoChatBackend>();
    case BackendKind::kMockFixed:
      return std::make_shared<FixedChatBackend>(config.mock_output);
    case BackendKind::kMockExtractive:
      return std::make_shared<ExtractiveChatBackend>(
          config.mock_scope == "first_sentence"
              ? ExtractiveChatBackend::Scope::kFirstSentence
              : ExtractiveChatBackend::Scope::kContext);
    default:
      throw ConfigError("generator backend must be http or a chat mock");
  }
}

std::shared_ptr<EmbedBackend> make_embed_backend(const EmbedderConfig& config) {
  switch (config.backend) {
    case BackendKind::kHttp:
      return std::make_shared<HttpEmbedBackend>(config.endpoint.base_url,
                                                config.endpoint.api_key_env,
                                                config.endpoint.timeout_ms);
    case BackendKind::kMockHash:
      return std::make_shared<HashEmbedBackend>(config.mock_dim);
    default:
      return nullptr;
  }
}

std::unique_ptr<Retriever> make_retriever(
    const RunConfig& config, std::shared_ptr<const Corpus> corpus,
    std::shared_ptr<GenerationClient> embed_client) {
  return make_retriever_kind(config.retriever.kind, config, corpus,
                             embed_client);
}

void cmd_index(const RunConfig& config) {
  config.validate();
  ensure_output_dir(config);
  const Corpus corpus = load_corpus(config.corpus_path);

  const std::string sparse_path = artifact_path(config, kSparseIndexArtifact);
  save_sparse_index(SparseIndex::build(corpus), sparse_path);
  write_manifest(sparse_path, "index", config,
                 {{"corpus", config.corpus_path}});
  std::printf("wrote %s (%zu documents)\n", sparse_path.c_str(), corpus.size());

  if (!needs_dense_store(config)) return;

  std::vector<std::pair<std::string, std::vector<float>>> rows;
  std::vector<std::pair<std::string, std::string>> inputs{
      {"corpus", config.corpus_path}};
  if (!config.embedder.vectors_path.empty()) {
    rows = load_vectors(config.embedder.vectors_path);
    inputs.emplace_back("vectors", config.embedder.vectors_path);
    std::unordered_set<std::string> seen;
    for (const auto& [id, vec] : rows) {
      if (!corpus.contains(id)) {
        throw PipelineError("vector id \"" + id + "\" is not in the corpus");
      }
      seen.insert(id);
    }
    for (const Document& doc : corpus.documents()) {
      if (seen.count(doc.id) == 0) {
        throw PipelineError("document \"" + doc.id + "\" has no vector in " +
                            config.embedder.vectors_path);
      }
    }
  } else {
    GenerationClient client(config.embedder.endpoint, nullptr,
                            make_embed_backend(config.embedder));
    const std::vector<Document>& docs = corpus.documents();
    constexpr std::size_t kBatch = 64;
    for (std::size_t i = 0; i < docs.size(); i += kBatch) {
      const std::size_t end = std::min(i + kBatch, docs.size());
      std::vector<std::string> texts;
      texts.reserve(end - i);
      for (std::size_t j = i; j < end; ++j) texts.push_back(docs[j].text);
      const auto vecs = client.embed_texts(texts);
      for (std::size_t j = i; j < end; ++j) {
        rows.emplace_back(docs[j].id, vecs[j - i]);
      }
    }
  }
  const DenseIndex validated = DenseIndex::build(rows);
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::string vectors_path = artifact_path(config, kVectorsArtifact);
  save_vectors(rows, vectors_path);
  write_manifest(vectors_path, "index", config, inputs);
  std::printf("wrote %s (%zu vectors, dim %zu)\n", vectors_path.c_str(),
              validated.size(), validated.dim());
}

void cmd_retrieve(const RunConfig& config) {
  config.validate();
  if (config.dataset_path.empty()) {
    throw ConfigError("dataset_path is required for retrieve");
  }
  ensure_output_dir(config);
  auto corpus = std::make_shared<const Corpus>(load_corpus(config.corpus_path));
  const std::vector<QAInstance> dataset = load_dataset(config.dataset_path);
  const std::unique_ptr<Retriever> retriever =
      make_retriever(config, corpus, make_embed_client(config));

  const std::size_t k = config.retrieval_k();
  std::vector<RetrievalRun> runs;
  runs.reserve(dataset.size());
  for (const QAInstance& inst : dataset) {
    Query query;
    query.id = inst.qa_id;
    query.text = inst.question;
    if (!inst.entity_id.empty()) query.entity_id = inst.entity_id;
    runs.push_back(RetrievalRun{inst.qa_id, retriever->retrieve(query, k)});
  }
  const std::string path = artifact_path(config, kRetrievalArtifact);
  save_retrieval_runs(std::move(runs), path);
  write_manifest(path, "retrieve", config,
                 {{"corpus", config.corpus_path},
                  {"dataset", config.dataset_path}});
  std::printf("wrote %s (%zu queries, k=%zu, retriever=%s)\n", path.c_str(),
              dataset.size(), k,
              retriever_kind_name(config.retriever.kind).c_str());
}

void cmd_generate(const RunConfig& config) {
  config.validate();
  if (config.dataset_path.empty()) {
    throw ConfigError("dataset_path is required for generate");
  }
  ensure_output_dir(config);
  const Corpus corpus = load_corpus(config.corpus_path);
  const std::vector<QAInstance> dataset = load_dataset(config.dataset_path);

  // Credential problems abort before the batch; everything later is
  // recorded per instance.
  if (config.generator.backend == BackendKind::kHttp &&
      !config.generator.endpoint.api_key_env.empty() &&
      std::getenv(config.generator.endpoint.api_key_env.c_str()) == nullptr) {
    throw ConfigError("environment variable " +
                      config.generator.endpoint.api_key_env + " is not set");
  }

  const bool is_srag = config.variant == RunVariant::kSragS ||
                       config.variant == RunVariant::kSragD;
  const bool uses_retrieval = config.variant != RunVariant::kNoRag;

  std::unordered_map<std::string, RankedList> runs;
  std::vector<std::pair<std::string, std::string>> inputs{
      {"corpus", config.corpus_path}, {"dataset", config.dataset_path}};
  if (uses_retrieval) {
    const std::string rpath = artifact_path(config, kRetrievalArtifact);
    require_artifact(rpath, "retrieve");
    for (RetrievalRun& run : load_retrieval_runs(rpath)) {
      runs.emplace(run.qa_id, std::move(run.ranked));
    }
    inputs.emplace_back("retrieval", rpath);
    for (const QAInstance& inst : dataset) {
      if (runs.count(inst.qa_id) == 0) {
        throw PipelineError("no retrieval run for \"" + inst.qa_id +
                            "\"; rerun retrieve");
      }
    }
  }

  GenerationClient client(config.generator.endpoint,
                          make_chat_backend(config.generator));
  std::unique_ptr<SentenceRanker> ranker;
  if (is_srag) {
    if (config.hint.ranker == "dense") {
      std::shared_ptr<GenerationClient> embed_client =
          make_embed_client(config);
      ranker = std::make_unique<DenseSentenceRanker>(
          [embed_client](const std::vector<std::string>& texts) {
            return embed_client->embed_texts(texts);
          });
    } else {
      ranker = std::make_unique<Bm25SentenceRanker>();
    }
  }
  const HintMode mode = config.variant == RunVariant::kSragS
                            ? HintMode::kSentence
                            : HintMode::kDocument;

  auto process = [&](const QAInstance& inst) -> InstanceResult {
    InstanceResult row;
    row.qa_id = inst.qa_id;
    row.bucket = assign_bucket(inst.pageviews, config.eval.log_base,
                               config.eval.bucket_edges);
    try {
      PromptSpec spec;
      spec.question = inst.question;
      spec.include_titles = config.include_titles;
      if (uses_retrieval) {
        const RankedList& ranked = runs.at(inst.qa_id);
        const std::size_t n_ctx =
            std::min(config.top_k_context, ranked.entries.size());
        for (std::size_t i = 0; i < n_ctx; ++i) {
          const std::string& doc_id = ranked.entries[i].doc_id;
          spec.context_docs.push_back(corpus.get(doc_id));
          row.retrieved_doc_ids.push_back(doc_id);
        }
        if (is_srag) {
          const std::size_t n_hint =
              std::min(config.hint_k(), ranked.entries.size());
          std::vector<Document> hint_docs;
          hint_docs.reserve(n_hint);
          for (std::size_t i = 0; i < n_hint; ++i) {
            hint_docs.push_back(corpus.get(ranked.entries[i].doc_id));
          }
          Hint hint = extract_hint(inst.question, hint_docs, *ranker, mode);
          row.hint = HintSummary{hint_mode_name(hint.mode),
                                 hint.source_doc_id, hint.sentence.text,
                                 hint.sentence.index};
          spec.hint = std::move(hint);
          spec.variant = Variant::kSrag;
        } else {
          spec.variant = Variant::kRag;
        }
      } else {
        spec.variant = Variant::kNoRag;
      }
      const std::string prompt = build_prompt(spec);
      const GenerationResult result = client.generate_answer(prompt);
      row.prediction = result.output_text;
      row.correct = is_correct(row.prediction, inst.gold_answers);
    } catch (const std::exception& e) {
      row.prediction.clear();
      row.correct = false;
      row.error = true;
      row.error_message = e.what();
    }
    return row;
  };

  std::vector<InstanceResult> rows(dataset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      rows[i] = process(dataset[i]);
    }
  };
  const std::size_t n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(
          std::max(config.generator.endpoint.max_concurrency, 1)),
      dataset.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  std::size_t errors = 0;
  for (const InstanceResult& row : rows) {
    if (row.error) ++errors;
  }
  const std::string path = artifact_path(config, kResultsArtifact);
  save_results(std::move(rows), path);
  write_manifest(path, "generate", config, inputs);
  std::printf("wrote %s (%zu instances, %zu failed, variant=%s)\n",
              path.c_str(), dataset.size(), errors,
              run_variant_name(config.variant).c_str());
}

void cmd_augment(const RunConfig& config) {
  config.validate();
  ensure_output_dir(config);
  const Corpus corpus = load_corpus(config.corpus_path);

  std::string tmpl = kQaGenerationTemplate;
  std::vector<std::pair<std::string, std::string>> inputs{
      {"corpus", config.corpus_path}};
  if (!config.augment.template_path.empty()) {
    std::ifstream in(config.augment.template_path);
    if (!in) {
      throw PipelineError("cannot open template file: " +
                          config.augment.template_path);
    }
    tmpl.assign(std::istreambuf_iterator<char>(in),
                std::istreambuf_iterator<char>());
    inputs.emplace_back("template", config.augment.template_path);
  }

  GenerationClient client(config.generator.endpoint,
                          make_chat_backend(config.generator));
  std::vector<QAPair> all_pairs;
  std::vector<std::pair<std::string, std::vector<QAPair>>> per_doc;
  std::size_t summaries = 0;
  std::size_t failures = 0;
  std::size_t empty_docs = 0;
  for (const Document& doc : corpus.documents()) {
    if (!doc.is_summary) continue;
    ++summaries;
    try {
      std::vector<QAPair> pairs = client.generate_qa_pairs(
          doc, tmpl, config.augment.consistency_filter);
      if (pairs.empty()) {
        ++empty_docs;
        continue;
      }
      all_pairs.insert(all_pairs.end(), pairs.begin(), pairs.end());
      per_doc.emplace_back(doc.id, std::move(pairs));
    } catch (const GenerationError& e) {
      ++failures;
      std::fprintf(stderr, "augment: %s: %s\n", doc.id.c_str(), e.what());
    }
  }

  const std::string path = artifact_path(config, kQaPairsArtifact);
  save_qa_pairs(all_pairs, path);
  write_manifest(path, "augment", config, inputs);

  if (config.augment.flatten) {
    const std::string flat_path = artifact_path(config, kQaFlatArtifact);
    std::ofstream flat(flat_path);
    if (!flat) {
      throw PipelineError("cannot write flattened file: " + flat_path);
    }
    for (const auto& [doc_id, pairs] : per_doc) {
      try {
        flat << flatten_qa_pairs(pairs) << '\n';
      } catch (const QaFormatError& e) {
        std::fprintf(stderr, "augment: %s: %s\n", doc_id.c_str(), e.what());
      }
    }
    flat.close();
    write_manifest(flat_path, "augment", config, inputs);
  }
  std::printf(
      "wrote %s (%zu pairs from %zu summary documents, %zu failed, %zu "
      "empty)\n",
      path.c_str(), all_pairs.size(), summaries, failures, empty_docs);
}

void cmd_evaluate(
    const RunConfig& config,
    const std::vector<std::pair<std::string, std::string>>& labeled_results) {
  config.validate();
  ensure_output_dir(config);

  std::vector<std::pair<std::string, std::string>> labeled = labeled_results;
  if (labeled.empty()) {
    labeled.emplace_back(run_variant_name(config.variant),
                         artifact_path(config, kResultsArtifact));
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, std::string> path_of;
  std::unordered_map<std::string, std::vector<InstanceResult>> results_of;
  for (const auto& [label, path] : labeled) {
    if (path_of.count(label) > 0) {
      throw PipelineError("duplicate run label \"" + label + "\"");
    }
    require_artifact(path, "generate");
    order.push_back(label);
    path_of.emplace(label, path);
    results_of.emplace(label, load_results(path));
  }

  const std::string& primary_label = order.front();
  const std::string& primary_path = path_of.at(primary_label);

  std::vector<RetrievalRecord> records;
  const std::string retrieval_path =
      (fs::path(primary_path).parent_path() / kRetrievalArtifact).string();
  if (fs::exists(retrieval_path) && !config.dataset_path.empty()) {
    const Corpus corpus = load_corpus(config.corpus_path);
    const std::vector<QAInstance> dataset = load_dataset(config.dataset_path);
    std::unordered_map<std::string, const QAInstance*> by_id;
    for (const QAInstance& inst : dataset) by_id.emplace(inst.qa_id, &inst);
    for (RetrievalRun& run : load_retrieval_runs(retrieval_path)) {
      auto it = by_id.find(run.qa_id);
      if (it == by_id.end()) continue;
      const QAInstance& inst = *it->second;
      if (inst.entity_id.empty() || !corpus.has_summary(inst.entity_id)) {
        continue;
      }
      records.push_back(RetrievalRecord{run.qa_id, std::move(run.ranked),
                                        corpus.summary_for(inst.entity_id).id});
    }
  }

  ReportOptions options;
  options.recall_ks = config.eval.recall_ks;
  EvalReport report =
      build_report(results_of.at(primary_label), records, options);

  std::vector<std::pair<std::string, std::string>> pairs =
      config.eval.significance_pairs;
  if (pairs.empty() && order.size() >= 2) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        pairs.emplace_back(order[i], order[j]);
      }
    }
  }
  for (const auto& [label_a, label_b] : pairs) {
    for (const std::string& label : {label_a, label_b}) {
      if (results_of.count(label) == 0) {
        throw PipelineError("significance pair references unknown run \"" +
                            label + "\"");
      }
    }
    const std::string hash_a = dataset_hash_from_manifest(path_of.at(label_a));
    const std::string hash_b = dataset_hash_from_manifest(path_of.at(label_b));
    if (hash_a != hash_b) {
      throw PipelineError("refusing to pair \"" + label_a + "\" and \"" +
                          label_b + "\": dataset hashes differ");
    }
    const std::vector<SignificanceEntry> entries =
        compare_runs(label_a, results_of.at(label_a), label_b,
                     results_of.at(label_b));
    report.significance.insert(report.significance.end(), entries.begin(),
                               entries.end());
  }

  std::vector<std::pair<std::string, std::string>> inputs;
  for (const std::string& label : order) {
    inputs.emplace_back(label, path_of.at(label));
  }
  const std::string json_path = artifact_path(config, kReportJsonArtifact);
  save_report_json(report, json_path);
  write_manifest(json_path, "evaluate", config, inputs);
  const std::string text_path = artifact_path(config, kReportTextArtifact);
  save_report_text(report, text_path);
  write_manifest(text_path, "evaluate", config, inputs);
  std::printf("wrote %s (accuracy %.4f over %zu instances)\n",
              json_path.c_str(), report.overall_accuracy,
              report.instance_count);
}

void cmd_report(const RunConfig& config) {
  config.validate();
  const std::string json_path = artifact_path(config, kReportJsonArtifact);
  require_artifact(json_path, "evaluate");
  const EvalReport report = load_report_json(json_path);
  const std::string text_path = artifact_path(config, kReportTextArtifact);
  save_report_text(report, text_path);
  write_manifest(text_path, "report", config, {{"report", json_path}});
  std::fputs(report_to_text(report).c_str(), stdout);
}

}  // namespace raglab
