#include "raglab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "raglab/version.hpp"

namespace raglab {

using json = nlohmann::json;

RetrieverKind parse_retriever_kind(const std::string& name) {
  if (name == "bm25") return RetrieverKind::kBm25;
  if (name == "dense") return RetrieverKind::kDense;
  if (name == "bm25_dense_rerank") return RetrieverKind::kRerank;
  if (name == "ideal") return RetrieverKind::kIdeal;
  throw ConfigError("unknown retriever \"" + name + "\"");
}

std::string retriever_kind_name(RetrieverKind kind) {
  switch (kind) {
    case RetrieverKind::kBm25:
      return "bm25";
    case RetrieverKind::kDense:
      return "dense";
    case RetrieverKind::kRerank:
      return "bm25_dense_rerank";
    case RetrieverKind::kIdeal:
      return "ideal";
  }
  return "bm25";
}

RunVariant parse_run_variant(const std::string& name) {
  if (name == "no_rag") return RunVariant::kNoRag;
  if (name == "rag") return RunVariant::kRag;
  if (name == "srag_s") return RunVariant::kSragS;
  if (name == "srag_d") return RunVariant::kSragD;
  throw ConfigError("unknown variant \"" + name + "\"");
}

std::string run_variant_name(RunVariant variant) {
  switch (variant) {
    case RunVariant::kNoRag:
      return "no_rag";
    case RunVariant::kRag:
      return "rag";
    case RunVariant::kSragS:
      return "srag_s";
    case RunVariant::kSragD:
      return "srag_d";
  }
  return "rag";
}

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "none") return BackendKind::kNone;
  if (name == "http") return BackendKind::kHttp;
  if (name == "mock_echo") return BackendKind::kMockEcho;
  if (name == "mock_fixed") return BackendKind::kMockFixed;
  if (name == "mock_extractive") return BackendKind::kMockExtractive;
  if (name == "mock_hash") return BackendKind::kMockHash;
  if (name == "vectors_file") return BackendKind::kVectorsFile;
  throw ConfigError("unknown backend \"" + name + "\"");
}

std::string backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kNone:
      return "none";
    case BackendKind::kHttp:
      return "http";
    case BackendKind::kMockEcho:
      return "mock_echo";
    case BackendKind::kMockFixed:
      return "mock_fixed";
    case BackendKind::kMockExtractive:
      return "mock_extractive";
    case BackendKind::kMockHash:
      return "mock_hash";
    case BackendKind::kVectorsFile:
      return "vectors_file";
  }
  return "none";
}

std::size_t RunConfig::retrieval_k() const {
  if (variant == RunVariant::kSragS || variant == RunVariant::kSragD) {
    return std::max(top_k_context, hint_k());
  }
  return top_k_context;
}

void RunConfig::validate() const {
  if (corpus_path.empty()) {
    throw ConfigError("corpus_path is required");
  }
  if (output_dir.empty()) {
    throw ConfigError("output_dir is required");
  }
  if (top_k_context < 1) {
    throw ConfigError("top_k_context must be >= 1");
  }
  if (retriever.kind == RetrieverKind::kRerank &&
      retriever.first_stage_depth < 1) {
    throw ConfigError("first_stage_depth must be >= 1");
  }
  if (retriever.kind == RetrieverKind::kIdeal &&
      retriever.fallback == RetrieverKind::kIdeal) {
    throw ConfigError("ideal retriever cannot use itself as fallback");
  }

  const bool needs_dense =
      retriever.kind == RetrieverKind::kDense ||
      retriever.kind == RetrieverKind::kRerank ||
      (retriever.kind == RetrieverKind::kIdeal &&
       (retriever.fallback == RetrieverKind::kDense ||
        retriever.fallback == RetrieverKind::kRerank));
  if (needs_dense && !embedder.query_capable()) {
    throw ConfigError(
        "retriever \"" + retriever_kind_name(retriever.kind) +
        "\" needs a query-capable embedder (http or mock_hash); a vectors "
        "file only supplies document vectors");
  }

  const bool is_srag =
      variant == RunVariant::kSragS || variant == RunVariant::kSragD;
  if (is_srag) {
    if (hint.ranker != "bm25" && hint.ranker != "dense") {
      throw ConfigError("unknown hint ranker \"" + hint.ranker + "\"");
    }
    if (hint.ranker == "dense" && !embedder.query_capable()) {
      throw ConfigError(
          "hint ranker \"dense\" needs a query-capable embedder");
    }
  }

  switch (generator.backend) {
    case BackendKind::kHttp:
      if (generator.endpoint.base_url.empty()) {
        throw ConfigError("generator.base_url is required for http backend");
      }
      break;
    case BackendKind::kMockEcho:
    case BackendKind::kMockFixed:
      break;
    case BackendKind::kMockExtractive:
      if (generator.mock_scope != "context" &&
          generator.mock_scope != "first_sentence") {
        throw ConfigError("unknown mock_scope \"" + generator.mock_scope +
                          "\"");
      }
      break;
    default:
      throw ConfigError("generator backend must be http or a chat mock");
  }
  generator.endpoint.validate();

  switch (embedder.backend) {
    case BackendKind::kNone:
      break;
    case BackendKind::kHttp:
      if (embedder.endpoint.base_url.empty()) {
        throw ConfigError("embedder.base_url is required for http backend");
      }
      break;
    case BackendKind::kMockHash:
      if (embedder.mock_dim < 1) {
        throw ConfigError("embedder.dim must be >= 1");
      }
      break;
    case BackendKind::kVectorsFile:
      if (embedder.vectors_path.empty()) {
        throw ConfigError("embedder.vectors_path is required");
      }
      break;
    default:
      throw ConfigError(
          "embedder backend must be none, http, mock_hash, or vectors_file");
  }
  embedder.endpoint.validate();

  for (std::size_t i = 1; i < eval.bucket_edges.size(); ++i) {
    if (!(eval.bucket_edges[i - 1] < eval.bucket_edges[i])) {
      throw ConfigError("eval.bucket_edges must be strictly ascending");
    }
  }
  for (int k : eval.recall_ks) {
    if (k < 1) {
      throw ConfigError("eval.recall_ks entries must be >= 1");
    }
  }
}

namespace {

json endpoint_to_json(const EndpointConfig& e) {
  return json{{"base_url", e.base_url},
              {"model_name", e.model_name},
              {"api_key_env", e.api_key_env},
              {"timeout_ms", e.timeout_ms},
              {"max_retries", e.max_retries},
              {"max_concurrency", e.max_concurrency},
              {"temperature", e.temperature},
              {"backoff_ms", e.backoff_ms}};
}

void endpoint_from_json(const json& obj, EndpointConfig& e) {
  e.base_url = obj.value("base_url", e.base_url);
  e.model_name = obj.value("model_name", e.model_name);
  e.api_key_env = obj.value("api_key_env", e.api_key_env);
  e.timeout_ms = obj.value("timeout_ms", e.timeout_ms);
  e.max_retries = obj.value("max_retries", e.max_retries);
  e.max_concurrency = obj.value("max_concurrency", e.max_concurrency);
  e.temperature = obj.value("temperature", e.temperature);
  e.backoff_ms = obj.value("backoff_ms", e.backoff_ms);
}

}  // namespace

json RunConfig::to_json() const {
  json retr{{"kind", retriever_kind_name(retriever.kind)},
            {"k1", retriever.bm25.k1},
            {"b", retriever.bm25.b},
            {"first_stage_depth", retriever.first_stage_depth},
            {"fallback", retriever_kind_name(retriever.fallback)}};
  json gen = endpoint_to_json(generator.endpoint);
  gen["backend"] = backend_kind_name(generator.backend);
  gen["mock_output"] = generator.mock_output;
  gen["mock_scope"] = generator.mock_scope;
  json emb = endpoint_to_json(embedder.endpoint);
  emb["backend"] = backend_kind_name(embedder.backend);
  emb["dim"] = embedder.mock_dim;
  emb["vectors_path"] = embedder.vectors_path;
  json pairs = json::array();
  for (const auto& [a, b] : eval.significance_pairs) {
    pairs.push_back(json::array({a, b}));
  }
  return json{
      {"corpus_path", corpus_path},
      {"dataset_path", dataset_path},
      {"output_dir", output_dir},
      {"retriever", retr},
      {"top_k_context", top_k_context},
      {"variant", run_variant_name(variant)},
      {"hint", json{{"ranker", hint.ranker}, {"k", hint.k}}},
      {"generator", gen},
      {"embedder", emb},
      {"eval",
       json{{"log_base", log_base_name(eval.log_base)},
            {"bucket_edges", eval.bucket_edges},
            {"recall_ks", eval.recall_ks},
            {"significance_pairs", pairs}}},
      {"augment",
       json{{"template_path", augment.template_path},
            {"consistency_filter", augment.consistency_filter},
            {"flatten", augment.flatten}}},
      {"include_titles", include_titles},
  };
}

RunConfig RunConfig::from_json(const json& obj) {
  RunConfig config;
  try {
    config.corpus_path = obj.value("corpus_path", std::string{});
    config.dataset_path = obj.value("dataset_path", std::string{});
    config.output_dir = obj.value("output_dir", std::string{});
    if (obj.contains("retriever")) {
      const json& retr = obj.at("retriever");
      config.retriever.kind =
          parse_retriever_kind(retr.value("kind", std::string{"bm25"}));
      config.retriever.bm25.k1 = retr.value("k1", config.retriever.bm25.k1);
      config.retriever.bm25.b = retr.value("b", config.retriever.bm25.b);
      config.retriever.first_stage_depth =
          retr.value("first_stage_depth", config.retriever.first_stage_depth);
      config.retriever.fallback =
          parse_retriever_kind(retr.value("fallback", std::string{"bm25"}));
    }
    config.top_k_context = obj.value("top_k_context", config.top_k_context);
    config.variant =
        parse_run_variant(obj.value("variant", std::string{"rag"}));
    if (obj.contains("hint")) {
      const json& hint = obj.at("hint");
      config.hint.ranker = hint.value("ranker", config.hint.ranker);
      config.hint.k = hint.value("k", config.hint.k);
    }
    if (obj.contains("generator")) {
      const json& gen = obj.at("generator");
      config.generator.backend =
          parse_backend_kind(gen.value("backend", std::string{"mock_echo"}));
      endpoint_from_json(gen, config.generator.endpoint);
      config.generator.mock_output =
          gen.value("mock_output", config.generator.mock_output);
      config.generator.mock_scope =
          gen.value("mock_scope", config.generator.mock_scope);
    }
    if (obj.contains("embedder")) {
      const json& emb = obj.at("embedder");
      config.embedder.backend =
          parse_backend_kind(emb.value("backend", std::string{"none"}));
      endpoint_from_json(emb, config.embedder.endpoint);
      config.embedder.mock_dim = emb.value("dim", config.embedder.mock_dim);
      config.embedder.vectors_path =
          emb.value("vectors_path", config.embedder.vectors_path);
    }
    if (obj.contains("eval")) {
      const json& ev = obj.at("eval");
      config.eval.log_base =
          parse_log_base(ev.value("log_base", std::string{"10"}));
      if (ev.contains("bucket_edges")) {
        const auto edges = ev.at("bucket_edges").get<std::vector<double>>();
        if (edges.size() != 4) {
          throw ConfigError("eval.bucket_edges must hold exactly 4 values");
        }
        std::copy(edges.begin(), edges.end(), config.eval.bucket_edges.begin());
      } else {
        config.eval.bucket_edges = default_edges(config.eval.log_base);
      }
      config.eval.recall_ks = ev.value("recall_ks", config.eval.recall_ks);
      if (ev.contains("significance_pairs")) {
        for (const auto& pair : ev.at("significance_pairs")) {
          if (!pair.is_array() || pair.size() != 2) {
            throw ConfigError(
                "eval.significance_pairs entries must be [labelA, labelB]");
          }
          config.eval.significance_pairs.emplace_back(
              pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
        }
      }
    }
    if (obj.contains("augment")) {
      const json& aug = obj.at("augment");
      config.augment.template_path =
          aug.value("template_path", config.augment.template_path);
      config.augment.consistency_filter =
          aug.value("consistency_filter", config.augment.consistency_filter);
      config.augment.flatten = aug.value("flatten", config.augment.flatten);
    }
    config.include_titles = obj.value("include_titles", config.include_titles);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  } catch (const EvalError& e) {
    throw ConfigError(e.what());
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json obj;
  try {
    in >> obj;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return RunConfig::from_json(obj);
}

std::uint64_t fnv1a64_bytes(const void* data, std::size_t size) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open file for hashing: " + path);
  }
  std::uint64_t h = 14695981039346656037ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

std::string fnv1a64_hex(std::uint64_t hash) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

namespace {

std::string utc_now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace

void write_manifest(
    const std::string& artifact_path, const std::string& command,
    const RunConfig& config,
    const std::vector<std::pair<std::string, std::string>>& inputs) {
  json input_map = json::object();
  for (const auto& [name, path] : inputs) {
    input_map[name] = json{{"path", path},
                           {"fnv1a64", fnv1a64_hex(fnv1a64_file(path))}};
  }
  const json manifest{
      {"engine_version", kEngineVersion},
      {"command", command},
      {"created_at", utc_now_iso8601()},
      {"config", config.to_json()},
      {"inputs", input_map},
      {"artifact",
       json{{"path", artifact_path},
            {"fnv1a64", fnv1a64_hex(fnv1a64_file(artifact_path))}}},
  };
  const std::string manifest_path = artifact_path + ".manifest.json";
  std::ofstream out(manifest_path);
  if (!out) {
    throw ConfigError("cannot write manifest: " + manifest_path);
  }
  out << manifest.dump(2) << '\n';
}

nlohmann::json read_manifest(const std::string& artifact_path) {
  const std::string manifest_path = artifact_path + ".manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    throw ConfigError("missing manifest: " + manifest_path);
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + manifest_path + ": " + e.what());
  }
  return manifest;
}

}  // namespace raglab
