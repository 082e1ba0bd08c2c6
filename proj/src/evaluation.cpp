#include "raglab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

#include "raglab/stats.hpp"
#include "raglab/text.hpp"

namespace raglab {

using json = nlohmann::json;

bool is_correct(const std::string& prediction,
                const std::vector<std::string>& gold_answers) {
  if (gold_answers.empty()) {
    throw EvalError("gold_answers must be non-empty");
  }
  const std::string pred = normalize_whitespace(to_lower(prediction));
  for (const std::string& gold : gold_answers) {
    const std::string needle = normalize_whitespace(to_lower(gold));
    if (needle.empty()) continue;
    if (pred.find(needle) != std::string::npos) return true;
  }
  return false;
}

double accuracy(const std::vector<InstanceResult>& results) {
  if (results.empty()) return 0.0;
  std::size_t correct = 0;
  for (const InstanceResult& r : results) {
    if (r.correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

int recall_at_k(const RankedList& ranked, const std::string& gold_doc_id,
                std::size_t k) {
  if (k < 1) {
    throw EvalError("recall_at_k requires k >= 1");
  }
  const std::size_t limit = std::min(k, ranked.entries.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked.entries[i].doc_id == gold_doc_id) return 1;
  }
  return 0;
}

LogBase parse_log_base(const std::string& name) {
  if (name == "10") return LogBase::k10;
  if (name == "2") return LogBase::k2;
  throw EvalError("unknown log base \"" + name + "\" (expected \"10\" or \"2\")");
}

std::string log_base_name(LogBase base) {
  return base == LogBase::k10 ? "10" : "2";
}

std::array<double, 4> default_edges(LogBase base) {
  if (base == LogBase::k10) return {2.0, 3.0, 4.0, 5.0};
  return {6.0, 8.0, 10.0, 12.0};
}

int assign_bucket(std::uint64_t pageviews, LogBase base,
                  const std::array<double, 4>& edges) {
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i - 1] < edges[i])) {
      throw EvalError("bucket edges must be strictly ascending");
    }
  }
  if (pageviews == 0) return 0;
  const double value = static_cast<double>(pageviews);
  const double lv = base == LogBase::k10 ? std::log10(value) : std::log2(value);
  int bucket = 0;
  for (double edge : edges) {
    if (edge < lv) ++bucket;
  }
  return bucket;
}

EvalReport build_report(std::vector<InstanceResult> results,
                        const std::vector<RetrievalRecord>& retrieval_runs,
                        const ReportOptions& options) {
  if (results.empty()) {
    throw EvalError("cannot build a report from zero results");
  }
  std::sort(results.begin(), results.end(),
            [](const InstanceResult& x, const InstanceResult& y) {
              return x.qa_id < y.qa_id;
            });
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].qa_id == results[i - 1].qa_id) {
      throw EvalError("duplicate qa_id \"" + results[i].qa_id + "\"");
    }
  }

  EvalReport report;
  report.instance_count = results.size();
  report.overall_accuracy = accuracy(results);

  std::array<std::size_t, 5> counts{};
  std::array<std::size_t, 5> correct{};
  for (const InstanceResult& r : results) {
    if (r.bucket < 0 || r.bucket > 4) {
      throw EvalError("result \"" + r.qa_id + "\" has bucket " +
                      std::to_string(r.bucket) + " outside 0..4");
    }
    ++counts[static_cast<std::size_t>(r.bucket)];
    if (r.correct) ++correct[static_cast<std::size_t>(r.bucket)];
  }
  for (std::size_t i = 0; i < 5; ++i) {
    report.per_bucket[i].count = counts[i];
    report.per_bucket[i].accuracy =
        counts[i] == 0 ? 0.0
                       : static_cast<double>(correct[i]) /
                             static_cast<double>(counts[i]);
  }

  if (!retrieval_runs.empty()) {
    for (int k : options.recall_ks) {
      double hits = 0.0;
      for (const RetrievalRecord& record : retrieval_runs) {
        hits += recall_at_k(record.ranked, record.gold_doc_id,
                            static_cast<std::size_t>(k));
      }
      report.recall_at[k] =
          hits / static_cast<double>(retrieval_runs.size());
    }
  }
  return report;
}

std::vector<SignificanceEntry> compare_runs(
    const std::string& label_a, const std::vector<InstanceResult>& a,
    const std::string& label_b, const std::vector<InstanceResult>& b) {
  if (a.size() != b.size()) {
    throw EvalError("result sets differ in size: " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  std::map<std::string, bool> by_id;
  for (const InstanceResult& r : a) {
    if (!by_id.emplace(r.qa_id, r.correct).second) {
      throw EvalError("duplicate qa_id \"" + r.qa_id + "\" in " + label_a);
    }
  }
  std::vector<double> va;
  std::vector<double> vb;
  va.reserve(a.size());
  vb.reserve(b.size());
  std::unordered_set<std::string> seen_b;
  std::vector<std::pair<std::string, bool>> b_sorted;
  for (const InstanceResult& r : b) {
    if (!seen_b.insert(r.qa_id).second) {
      throw EvalError("duplicate qa_id \"" + r.qa_id + "\" in " + label_b);
    }
    b_sorted.emplace_back(r.qa_id, r.correct);
  }
  std::sort(b_sorted.begin(), b_sorted.end());
  for (const auto& [qa_id, correct_b] : b_sorted) {
    auto it = by_id.find(qa_id);
    if (it == by_id.end()) {
      throw EvalError("qa_id \"" + qa_id + "\" present in " + label_b +
                      " but not in " + label_a);
    }
    va.push_back(it->second ? 1.0 : 0.0);
    vb.push_back(correct_b ? 1.0 : 0.0);
  }

  const std::string pair_label = label_a + " vs " + label_b;
  std::vector<SignificanceEntry> entries;

  const WilcoxonResult w = wilcoxon_signed_rank(va, vb);
  SignificanceEntry we;
  we.pair_label = pair_label;
  we.test = "wilcoxon";
  we.statistic = w.w;
  we.p_value = w.p_two_sided;
  we.valid = true;
  if (w.all_zero) {
    we.note = "all differences zero; p forced to 1";
  } else {
    we.note = w.exact ? "exact, n=" + std::to_string(w.n_nonzero)
                      : "normal approximation, n=" +
                            std::to_string(w.n_nonzero);
  }
  entries.push_back(std::move(we));

  SignificanceEntry te;
  te.pair_label = pair_label;
  te.test = "t";
  if (va.size() < 2) {
    te.valid = false;
    te.note = "fewer than two pairs";
  } else {
    const TTestResult t = paired_t_test(va, vb);
    if (t.degenerate) {
      te.valid = false;
      te.note = "zero variance of differences";
    } else {
      te.statistic = t.t;
      te.p_value = t.p_two_sided;
      te.note = "df=" + std::to_string(static_cast<long long>(t.df));
    }
  }
  entries.push_back(std::move(te));
  return entries;
}

std::vector<QAInstance> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw EvalError("cannot open dataset file: " + path);
  }
  std::vector<QAInstance> dataset;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw EvalError(where + e.what());
    }
    try {
      QAInstance inst;
      inst.qa_id = obj.at("id").get<std::string>();
      inst.question = obj.at("question").get<std::string>();
      inst.gold_answers = obj.at("answers").get<std::vector<std::string>>();
      inst.entity_id = obj.at("entity_id").get<std::string>();
      inst.pageviews = obj.at("pageviews").get<std::uint64_t>();
      inst.relation = obj.value("relation", std::string{});
      if (inst.qa_id.empty()) {
        throw EvalError(where + "empty id");
      }
      if (inst.gold_answers.empty()) {
        throw EvalError(where + "instance \"" + inst.qa_id +
                        "\" has no answers");
      }
      if (!ids.insert(inst.qa_id).second) {
        throw EvalError(where + "duplicate id \"" + inst.qa_id + "\"");
      }
      dataset.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw EvalError(where + e.what());
    }
  }
  return dataset;
}

void save_dataset(const std::vector<QAInstance>& dataset,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw EvalError("cannot write dataset file: " + path);
  }
  for (const QAInstance& inst : dataset) {
    const json obj{{"id", inst.qa_id},
                   {"question", inst.question},
                   {"answers", inst.gold_answers},
                   {"entity_id", inst.entity_id},
                   {"pageviews", inst.pageviews},
                   {"relation", inst.relation}};
    out << obj.dump() << '\n';
  }
}

namespace {

json result_to_json(const InstanceResult& r) {
  json obj{{"qa_id", r.qa_id},
           {"prediction", r.prediction},
           {"correct", r.correct},
           {"bucket", r.bucket},
           {"retrieved_doc_ids", r.retrieved_doc_ids},
           {"error", r.error}};
  if (r.hint) {
    obj["hint"] = json{{"mode", r.hint->mode},
                       {"source_doc_id", r.hint->source_doc_id},
                       {"sentence_text", r.hint->sentence_text},
                       {"sentence_index", r.hint->sentence_index}};
  } else {
    obj["hint"] = nullptr;
  }
  if (r.error) {
    obj["error_message"] = r.error_message;
  }
  return obj;
}

InstanceResult result_from_json(const json& obj) {
  InstanceResult r;
  r.qa_id = obj.at("qa_id").get<std::string>();
  r.prediction = obj.at("prediction").get<std::string>();
  r.correct = obj.at("correct").get<bool>();
  r.bucket = obj.at("bucket").get<int>();
  r.retrieved_doc_ids =
      obj.at("retrieved_doc_ids").get<std::vector<std::string>>();
  r.error = obj.value("error", false);
  r.error_message = obj.value("error_message", std::string{});
  if (obj.contains("hint") && !obj.at("hint").is_null()) {
    const json& h = obj.at("hint");
    HintSummary hint;
    hint.mode = h.at("mode").get<std::string>();
    hint.source_doc_id = h.at("source_doc_id").get<std::string>();
    hint.sentence_text = h.at("sentence_text").get<std::string>();
    hint.sentence_index = h.at("sentence_index").get<std::size_t>();
    r.hint = std::move(hint);
  }
  if (r.bucket < 0 || r.bucket > 4) {
    throw EvalError("result \"" + r.qa_id + "\" has bucket " +
                    std::to_string(r.bucket) + " outside 0..4");
  }
  return r;
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

}  // namespace

std::vector<InstanceResult> load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw EvalError("cannot open results file: " + path);
  }
  std::vector<InstanceResult> results;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      results.push_back(result_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw EvalError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return results;
}

void save_results(std::vector<InstanceResult> results,
                  const std::string& path) {
  std::sort(results.begin(), results.end(),
            [](const InstanceResult& x, const InstanceResult& y) {
              return x.qa_id < y.qa_id;
            });
  std::ofstream out(path);
  if (!out) {
    throw EvalError("cannot write results file: " + path);
  }
  for (const InstanceResult& r : results) {
    out << result_to_json(r).dump() << '\n';
  }
}

void save_report_json(const EvalReport& report, const std::string& path) {
  json buckets = json::array();
  for (const BucketStat& b : report.per_bucket) {
    buckets.push_back(json{{"count", b.count}, {"accuracy", b.accuracy}});
  }
  std::map<std::string, double> recall;
  for (const auto& [k, v] : report.recall_at) {
    recall.emplace(std::to_string(k), v);
  }
  json significance = json::array();
  for (const SignificanceEntry& s : report.significance) {
    json entry{{"pair", s.pair_label},
               {"test", s.test},
               {"valid", s.valid},
               {"note", s.note}};
    if (s.valid) {
      entry["statistic"] = s.statistic;
      entry["p_value"] = s.p_value;
    } else {
      entry["statistic"] = nullptr;
      entry["p_value"] = nullptr;
    }
    significance.push_back(std::move(entry));
  }
  const json obj{{"instance_count", report.instance_count},
                 {"overall_accuracy", report.overall_accuracy},
                 {"per_bucket", buckets},
                 {"recall_at", recall},
                 {"significance", significance}};
  std::ofstream out(path);
  if (!out) {
    throw EvalError("cannot write report file: " + path);
  }
  out << obj.dump(2) << '\n';
}

EvalReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw EvalError("cannot open report file: " + path);
  }
  json obj;
  try {
    in >> obj;
  } catch (const json::parse_error& e) {
    throw EvalError("report " + path + ": " + e.what());
  }
  try {
    EvalReport report;
    report.instance_count = obj.at("instance_count").get<std::size_t>();
    report.overall_accuracy = obj.at("overall_accuracy").get<double>();
    const json& buckets = obj.at("per_bucket");
    if (buckets.size() != report.per_bucket.size()) {
      throw EvalError("report " + path + ": per_bucket must hold 5 entries");
    }
    for (std::size_t i = 0; i < report.per_bucket.size(); ++i) {
      report.per_bucket[i].count = buckets.at(i).at("count").get<std::size_t>();
      report.per_bucket[i].accuracy =
          buckets.at(i).at("accuracy").get<double>();
    }
    for (const auto& [k, v] : obj.at("recall_at").items()) {
      report.recall_at[std::stoi(k)] = v.get<double>();
    }
    for (const json& entry : obj.at("significance")) {
      SignificanceEntry s;
      s.pair_label = entry.at("pair").get<std::string>();
      s.test = entry.at("test").get<std::string>();
      s.valid = entry.at("valid").get<bool>();
      s.note = entry.at("note").get<std::string>();
      if (s.valid) {
        s.statistic = entry.at("statistic").get<double>();
        s.p_value = entry.at("p_value").get<double>();
      }
      report.significance.push_back(std::move(s));
    }
    return report;
  } catch (const json::exception& e) {
    throw EvalError("report " + path + ": " + e.what());
  }
}

std::string report_to_text(const EvalReport& report) {
  std::string out;
  out += "instances: " + std::to_string(report.instance_count) + '\n';
  out += "overall accuracy: " + format_fixed(report.overall_accuracy, 4) + '\n';
  out += '\n';
  out += "bucket  count  accuracy\n";
  for (std::size_t i = 0; i < report.per_bucket.size(); ++i) {
    char row[64];
    std::snprintf(row, sizeof(row), "%-6zu  %-5zu  %s\n", i,
                  report.per_bucket[i].count,
                  format_fixed(report.per_bucket[i].accuracy, 4).c_str());
    out += row;
  }
  if (!report.recall_at.empty()) {
    out += '\n';
    for (const auto& [k, v] : report.recall_at) {
      out += "recall@" + std::to_string(k) + ": " + format_fixed(v, 4) + '\n';
    }
  }
  if (!report.significance.empty()) {
    out += '\n';
    out += "significance:\n";
    for (const SignificanceEntry& s : report.significance) {
      out += "  " + s.pair_label + "  " + s.test;
      if (s.valid) {
        out += "  statistic=" + format_fixed(s.statistic, 4) +
               "  p=" + format_fixed(s.p_value, 6);
      } else {
        out += "  undefined";
      }
      if (!s.note.empty()) {
        out += "  (" + s.note + ")";
      }
      out += '\n';
    }
  }
  return out;
}

void save_report_text(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw EvalError("cannot write report file: " + path);
  }
  out << report_to_text(report);
}

}  // namespace raglab
