#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "raglab/config.hpp"
#include "raglab/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string corpus;
  std::string dataset;
  std::string output_dir;
  std::string retriever;
  std::string variant;
  int top_k = 0;
};

raglab::RunConfig resolve(const Overrides& o) {
  raglab::RunConfig config = raglab::load_run_config(o.config_path);
  if (!o.corpus.empty()) config.corpus_path = o.corpus;
  if (!o.dataset.empty()) config.dataset_path = o.dataset;
  if (!o.output_dir.empty()) config.output_dir = o.output_dir;
  if (!o.retriever.empty()) {
    config.retriever.kind = raglab::parse_retriever_kind(o.retriever);
  }
  if (!o.variant.empty()) {
    config.variant = raglab::parse_run_variant(o.variant);
  }
  if (o.top_k > 0) config.top_k_context = static_cast<std::size_t>(o.top_k);
  return config;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "run configuration file")
      ->required();
  cmd->add_option("--corpus", o.corpus, "override corpus path");
  cmd->add_option("--dataset", o.dataset, "override dataset path");
  cmd->add_option("--output-dir", o.output_dir, "override output directory");
  cmd->add_option("--retriever", o.retriever,
                  "override retriever (bm25, dense, bm25_dense_rerank, ideal)");
  cmd->add_option("--variant", o.variant,
                  "override variant (no_rag, rag, srag_s, srag_d)");
  cmd->add_option("--top-k", o.top_k, "override context document count");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-augmented generation experiment runner"};
  app.require_subcommand(1);

  Overrides o;
  std::vector<std::string> labeled;

  CLI::App* index =
      app.add_subcommand("index", "build retrieval artifacts for the corpus");
  add_common(index, o);
  CLI::App* retrieve =
      app.add_subcommand("retrieve", "rank documents for every question");
  add_common(retrieve, o);
  CLI::App* generate =
      app.add_subcommand("generate", "build prompts and collect answers");
  add_common(generate, o);
  CLI::App* augment = app.add_subcommand(
      "augment", "synthesize question-answer pairs from summary documents");
  add_common(augment, o);
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score results and write a report");
  add_common(evaluate, o);
  evaluate->add_option(
      "runs", labeled,
      "label=path result files to compare (first one is primary)");
  CLI::App* report =
      app.add_subcommand("report", "render the report from report.json");
  add_common(report, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const raglab::RunConfig config = resolve(o);
    if (index->parsed()) {
      raglab::cmd_index(config);
    } else if (retrieve->parsed()) {
      raglab::cmd_retrieve(config);
    } else if (generate->parsed()) {
      raglab::cmd_generate(config);
    } else if (augment->parsed()) {
      raglab::cmd_augment(config);
    } else if (evaluate->parsed()) {
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const std::string& item : labeled) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
          std::fprintf(stderr, "error: expected label=path, got \"%s\"\n",
                       item.c_str());
          return 2;
        }
        pairs.emplace_back(item.substr(0, eq), item.substr(eq + 1));
      }
      raglab::cmd_evaluate(config, pairs);
    } else if (report->parsed()) {
      raglab::cmd_report(config);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
