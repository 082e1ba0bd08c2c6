#include "raglab/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"

#include "raglab/text.hpp"

namespace raglab {

using json = nlohmann::json;

SparseIndex SparseIndex::build(const Corpus& corpus) {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs;
  docs.reserve(corpus.size());
  for (const Document& doc : corpus.documents()) {
    docs.emplace_back(doc.id, tokenize(doc.text));
  }
  return build_from_tokens(docs);
}

SparseIndex SparseIndex::build_units(
    const std::vector<std::pair<std::string, std::string>>& units) {
  std::vector<std::pair<std::string, std::vector<std::string>>> docs;
  docs.reserve(units.size());
  for (const auto& [id, text] : units) {
    docs.emplace_back(id, tokenize(text));
  }
  return build_from_tokens(docs);
}

SparseIndex SparseIndex::build_from_tokens(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
  std::unordered_map<std::string, std::vector<Posting>> postings;
  std::unordered_map<std::string, std::size_t> doc_lengths;
  std::size_t total_length = 0;

  for (const auto& [doc_id, tokens] : docs) {
    if (doc_lengths.count(doc_id) > 0) {
      throw IndexError("duplicate unit id \"" + doc_id + "\"");
    }
    doc_lengths[doc_id] = tokens.size();
    total_length += tokens.size();
    std::unordered_map<std::string, std::uint32_t> counts;
    for (const std::string& token : tokens) ++counts[token];
    for (const auto& [term, tf] : counts) {
      postings[term].push_back(Posting{doc_id, tf});
    }
  }
  // Sorted posting lists keep the artifact and every downstream iteration
  // independent of corpus file order.
  for (auto& [term, list] : postings) {
    std::sort(list.begin(), list.end(),
              [](const Posting& a, const Posting& b) { return a.doc_id < b.doc_id; });
  }
  const double avg =
      docs.empty() ? 0.0
                   : static_cast<double>(total_length) /
                         static_cast<double>(docs.size());
  return SparseIndex(std::move(postings), std::move(doc_lengths), avg,
                     docs.size());
}

double SparseIndex::idf(const std::string& term) const {
  auto it = postings_.find(term);
  const double df =
      it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(doc_count_);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double SparseIndex::term_doc_score(const Posting& posting, double idf_value,
                                   const Bm25Params& params) const {
  const double tf = static_cast<double>(posting.term_frequency);
  const double len = static_cast<double>(doc_lengths_.at(posting.doc_id));
  const double norm = avg_doc_length_ > 0.0 ? len / avg_doc_length_ : 0.0;
  const double denom = tf + params.k1 * (1.0 - params.b + params.b * norm);
  return idf_value * tf * (params.k1 + 1.0) / denom;
}

double SparseIndex::score(const std::vector<std::string>& query_terms,
                          const std::string& doc_id,
                          const Bm25Params& params) const {
  if (doc_lengths_.count(doc_id) == 0) {
    throw IndexError("unknown doc_id \"" + doc_id + "\"");
  }
  double total = 0.0;
  for (const std::string& term : query_terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    auto pit = std::lower_bound(
        list.begin(), list.end(), doc_id,
        [](const Posting& p, const std::string& id) { return p.doc_id < id; });
    if (pit == list.end() || pit->doc_id != doc_id) continue;
    total += term_doc_score(*pit, idf(term), params);
  }
  return total;
}

RankedList SparseIndex::search(const std::string& query, std::size_t k,
                               const Bm25Params& params,
                               const std::string& query_id) const {
  const std::vector<std::string> terms = tokenize(query);
  // Accumulate over sorted doc ids in query-term order so every run sums in
  // the same order.
  std::map<std::string, double> accum;
  for (const std::string& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double idf_value = idf(term);
    for (const Posting& posting : it->second) {
      accum[posting.doc_id] += term_doc_score(posting, idf_value, params);
    }
  }
  std::vector<ScoredEntry> entries;
  entries.reserve(accum.size());
  for (const auto& [doc_id, score] : accum) {
    if (score > 0.0) entries.push_back(ScoredEntry{doc_id, score});
  }
  sort_and_truncate(entries, k);
  return RankedList{query_id, std::move(entries), k};
}

void save_sparse_index(const SparseIndex& index, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IndexError("cannot write index file: " + path);
  }
  // std::map keys give a deterministic serialization.
  std::map<std::string, json> postings;
  for (const auto& [term, list] : index.postings()) {
    json arr = json::array();
    for (const Posting& p : list) {
      arr.push_back(json::array({p.doc_id, p.term_frequency}));
    }
    postings.emplace(term, std::move(arr));
  }
  std::map<std::string, std::size_t> lengths(index.doc_lengths().begin(),
                                             index.doc_lengths().end());
  json artifact{
      {"doc_count", index.doc_count()},
      {"avg_doc_length", index.avg_doc_length()},
      {"doc_lengths", lengths},
      {"postings", postings},
  };
  out << artifact.dump(2) << '\n';
}

SparseIndex load_sparse_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IndexError("cannot open index file: " + path);
  }
  json artifact;
  try {
    in >> artifact;
  } catch (const json::parse_error& e) {
    throw IndexError("invalid index file " + path + ": " + e.what());
  }
  try {
    std::unordered_map<std::string, std::vector<Posting>> postings;
    std::unordered_map<std::string, std::size_t> doc_lengths;
    for (const auto& [doc_id, len] : artifact.at("doc_lengths").items()) {
      doc_lengths[doc_id] = len.get<std::size_t>();
    }
    for (const auto& [term, list] : artifact.at("postings").items()) {
      std::vector<Posting>& plist = postings[term];
      for (const auto& entry : list) {
        plist.push_back(Posting{entry.at(0).get<std::string>(),
                                entry.at(1).get<std::uint32_t>()});
      }
    }
    return SparseIndex(std::move(postings), std::move(doc_lengths),
                       artifact.at("avg_doc_length").get<double>(),
                       artifact.at("doc_count").get<std::size_t>());
  } catch (const json::exception& e) {
    throw IndexError("invalid index file " + path + ": " + e.what());
  }
}

}  // namespace raglab
