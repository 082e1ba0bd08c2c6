#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "raglab/config.hpp"
#include "raglab/generation.hpp"
#include "raglab/ranked.hpp"
#include "raglab/retriever.hpp"

namespace raglab {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Artifact file names under output_dir. Every artifact gets a sibling
// "<name>.manifest.json".
inline constexpr char kSparseIndexArtifact[] = "sparse_index.json";
inline constexpr char kVectorsArtifact[] = "vectors.jsonl";
inline constexpr char kRetrievalArtifact[] = "retrieval.jsonl";
inline constexpr char kResultsArtifact[] = "results.jsonl";
inline constexpr char kQaPairsArtifact[] = "qa_pairs.jsonl";
inline constexpr char kQaFlatArtifact[] = "qa_flat.txt";
inline constexpr char kReportJsonArtifact[] = "report.json";
inline constexpr char kReportTextArtifact[] = "report.txt";

std::string artifact_path(const RunConfig& config, const char* name);

/// One persisted retrieval result.
struct RetrievalRun {
  std::string qa_id;
  RankedList ranked;
};

/// JSON Lines {"qa_id","k_requested","entries":[[doc_id, score], ...]},
/// sorted by qa_id.
void save_retrieval_runs(std::vector<RetrievalRun> runs,
                         const std::string& path);
std::vector<RetrievalRun> load_retrieval_runs(const std::string& path);

/// Chat/embed backends selected by the config (http or mocks).
std::shared_ptr<ChatBackend> make_chat_backend(const GeneratorConfig& config);
std::shared_ptr<EmbedBackend> make_embed_backend(const EmbedderConfig& config);

/// Retriever over the artifacts persisted in output_dir.
std::unique_ptr<Retriever> make_retriever(
    const RunConfig& config, std::shared_ptr<const Corpus> corpus,
    std::shared_ptr<GenerationClient> embed_client);

/// Builds and persists the sparse index, plus the dense vector store when
/// the configured retriever needs one.
void cmd_index(const RunConfig& config);

/// Runs the configured retriever over every dataset question; depth covers
/// both the prompt context and the hint pool.
void cmd_retrieve(const RunConfig& config);

/// Generates an answer per question under the configured variant. Failures
/// are recorded per instance; the batch never aborts.
void cmd_generate(const RunConfig& config);

/// Generates synthetic QA pairs from every summary document.
void cmd_augment(const RunConfig& config);

/// Builds report.json/report.txt from one or more labeled results files
/// ("label=path"). With no labels, evaluates output_dir/results.jsonl.
/// Significance pairs are refused when the runs' dataset hashes differ.
void cmd_evaluate(
    const RunConfig& config,
    const std::vector<std::pair<std::string, std::string>>& labeled_results);

/// Re-renders report.txt from report.json and prints it.
void cmd_report(const RunConfig& config);

}  // namespace raglab
