#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "raglab/ranked.hpp"

namespace raglab {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QAInstance {
  std::string qa_id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::string entity_id;
  std::uint64_t pageviews = 0;
  std::string relation;
};

/// What the results file records about the hint that was used.
struct HintSummary {
  std::string mode;  // "S" or "D"
  std::string source_doc_id;
  std::string sentence_text;
  std::size_t sentence_index = 0;
};

struct InstanceResult {
  std::string qa_id;
  std::string prediction;
  bool correct = false;
  int bucket = 0;
  std::vector<std::string> retrieved_doc_ids;
  std::optional<HintSummary> hint;
  bool error = false;  // generation failed; the row counts as incorrect
  std::string error_message;
};

struct BucketStat {
  std::size_t count = 0;
  double accuracy = 0.0;
};

struct SignificanceEntry {
  std::string pair_label;
  std::string test;  // "wilcoxon" or "t"
  double statistic = 0.0;
  double p_value = 1.0;
  bool valid = true;  // false when the test is undefined on these inputs
  std::string note;
};

struct EvalReport {
  std::size_t instance_count = 0;
  double overall_accuracy = 0.0;
  std::array<BucketStat, 5> per_bucket{};
  std::map<int, double> recall_at;
  std::vector<SignificanceEntry> significance;
};

/// Substring-match correctness: both sides lowercased and
/// whitespace-collapsed, then true iff some gold answer is a substring of
/// the prediction.
bool is_correct(const std::string& prediction,
                const std::vector<std::string>& gold_answers);

/// Fraction of correct rows; 0 on empty input.
double accuracy(const std::vector<InstanceResult>& results);

/// 1 iff gold_doc_id is among the top k entries.
int recall_at_k(const RankedList& ranked, const std::string& gold_doc_id,
                std::size_t k);

enum class LogBase {
  k10,
  k2,
};

LogBase parse_log_base(const std::string& name);
std::string log_base_name(LogBase base);

/// Default bucket edges: [2,3,4,5] for log10, [6,8,10,12] for log2.
std::array<double, 4> default_edges(LogBase base);

/// Bucket = number of edges strictly below log_base(pageviews); zero
/// pageviews map to bucket 0. Edges must be strictly ascending.
int assign_bucket(std::uint64_t pageviews, LogBase base,
                  const std::array<double, 4>& edges);

/// One instance's retrieval outcome, for Recall@K aggregation.
struct RetrievalRecord {
  std::string qa_id;
  RankedList ranked;
  std::string gold_doc_id;
};

struct ReportOptions {
  std::vector<int> recall_ks = {1, 3, 5};
};

/// Sorts results by qa_id, then aggregates overall and per-bucket accuracy
/// plus mean Recall@K over the retrieval records. Duplicate qa_ids and empty
/// input are errors. The significance list is left empty; fill it with
/// compare_runs.
EvalReport build_report(std::vector<InstanceResult> results,
                        const std::vector<RetrievalRecord>& retrieval_runs,
                        const ReportOptions& options = {});

/// Pairs two result sets by qa_id (the id sets must match exactly) and runs
/// the Wilcoxon signed-rank and paired t-test on the 0/1 correctness
/// vectors. Returns one entry per test.
std::vector<SignificanceEntry> compare_runs(
    const std::string& label_a, const std::vector<InstanceResult>& a,
    const std::string& label_b, const std::vector<InstanceResult>& b);

/// JSON Lines {"id","question","answers":[...],"entity_id","pageviews","relation"}.
std::vector<QAInstance> load_dataset(const std::string& path);
void save_dataset(const std::vector<QAInstance>& dataset,
                  const std::string& path);

/// JSON Lines of InstanceResult rows, sorted by qa_id on save.
std::vector<InstanceResult> load_results(const std::string& path);
void save_results(std::vector<InstanceResult> results,
                  const std::string& path);

/// report.json (machine-readable) and report.txt (plain-text table).
void save_report_json(const EvalReport& report, const std::string& path);
EvalReport load_report_json(const std::string& path);
std::string report_to_text(const EvalReport& report);
void save_report_text(const EvalReport& report, const std::string& path);

}  // namespace raglab
