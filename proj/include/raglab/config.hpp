#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "raglab/evaluation.hpp"
#include "raglab/generation.hpp"
#include "raglab/sparse.hpp"

namespace raglab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RetrieverKind {
  kBm25,
  kDense,
  kRerank,  // bm25_dense_rerank
  kIdeal,
};

RetrieverKind parse_retriever_kind(const std::string& name);
std::string retriever_kind_name(RetrieverKind kind);

/// Pipeline variant at the configuration level; SRAG carries its hint mode.
enum class RunVariant {
  kNoRag,
  kRag,
  kSragS,
  kSragD,
};

RunVariant parse_run_variant(const std::string& name);
std::string run_variant_name(RunVariant variant);

enum class BackendKind {
  kNone,
  kHttp,
  kMockEcho,
  kMockFixed,
  kMockExtractive,
  kMockHash,
  kVectorsFile,
};

BackendKind parse_backend_kind(const std::string& name);
std::string backend_kind_name(BackendKind kind);

struct RetrieverConfig {
  RetrieverKind kind = RetrieverKind::kBm25;
  Bm25Params bm25;
  std::size_t first_stage_depth = 100;         // rerank only
  RetrieverKind fallback = RetrieverKind::kBm25;  // ideal only
};

struct GeneratorConfig {
  BackendKind backend = BackendKind::kMockEcho;
  EndpointConfig endpoint;
  std::string mock_output;                  // mock_fixed
  std::string mock_scope = "context";       // mock_extractive: context | first_sentence
};

struct EmbedderConfig {
  BackendKind backend = BackendKind::kNone;
  EndpointConfig endpoint;
  std::size_t mock_dim = 64;   // mock_hash
  std::string vectors_path;    // vectors_file: precomputed document vectors

  /// True when this embedder can embed query/sentence text at run time.
  bool query_capable() const {
    return backend == BackendKind::kHttp || backend == BackendKind::kMockHash;
  }
};

struct HintConfig {
  std::string ranker = "bm25";  // bm25 | dense
  std::size_t k = 0;            // 0: follow top_k_context
};

struct EvalConfig {
  LogBase log_base = LogBase::k10;
  std::array<double, 4> bucket_edges = {2.0, 3.0, 4.0, 5.0};
  std::vector<int> recall_ks = {1, 3, 5};
  std::vector<std::pair<std::string, std::string>> significance_pairs;
};

struct AugmentConfig {
  std::string template_path;  // empty: built-in template
  bool consistency_filter = true;
  bool flatten = true;
};

struct RunConfig {
  std::string corpus_path;
  std::string dataset_path;
  std::string output_dir;
  RetrieverConfig retriever;
  std::size_t top_k_context = 3;
  RunVariant variant = RunVariant::kRag;
  HintConfig hint;
  GeneratorConfig generator;
  EmbedderConfig embedder;
  EvalConfig eval;
  AugmentConfig augment;
  bool include_titles = false;

  /// Hint pool depth; defaults to top_k_context when unset.
  std::size_t hint_k() const { return hint.k == 0 ? top_k_context : hint.k; }

  /// Retrieval depth that serves both the prompt context and the hint pool.
  std::size_t retrieval_k() const;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& obj);
};

RunConfig load_run_config(const std::string& path);

/// FNV-1a over the file's bytes; the hash recorded in manifests.
std::uint64_t fnv1a64_file(const std::string& path);
std::uint64_t fnv1a64_bytes(const void* data, std::size_t size);
std::string fnv1a64_hex(std::uint64_t hash);

/// Writes "<artifact_path>.manifest.json" recording the engine version, a
/// UTC timestamp, the config snapshot, input hashes, and the artifact's own
/// hash. Timestamps live only in manifests so artifacts stay byte-stable.
void write_manifest(
    const std::string& artifact_path, const std::string& command,
    const RunConfig& config,
    const std::vector<std::pair<std::string, std::string>>& inputs);

/// Reads the manifest next to an artifact. Throws ConfigError when missing
/// or malformed.
nlohmann::json read_manifest(const std::string& artifact_path);

}  // namespace raglab
