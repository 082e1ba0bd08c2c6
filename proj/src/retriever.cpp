#include "raglab/retriever.hpp"

#include <algorithm>

namespace raglab {

RankedList DenseRetriever::retrieve(const Query& query, std::size_t k) const {
  const std::vector<float> qvec = encoder_(query.text);
  return index_->search(qvec, k, query.id);
}

RankedList RerankRetriever::retrieve(const Query& query, std::size_t k) const {
  RankedList first =
      sparse_->search(query.text, first_stage_depth_, params_, query.id);
  std::vector<std::string> candidates;
  candidates.reserve(first.entries.size());
  for (const ScoredEntry& e : first.entries) candidates.push_back(e.doc_id);
  const std::vector<float> qvec = encoder_(query.text);
  return dense_->rerank(qvec, candidates, k, query.id);
}

RankedList ideal_retrieve(const Corpus& corpus, const Query& query,
                          std::size_t k, const Retriever& fallback) {
  if (!query.entity_id) {
    throw RetrievalError("query \"" + query.id + "\" has no entity_id");
  }
  const Document& summary = corpus.summary_for(*query.entity_id);
  if (k == 0) {
    return RankedList{query.id, {}, 0};
  }
  RankedList fill = fallback.retrieve(query, k);
  double sentinel = 1.0;
  if (!fill.entries.empty()) {
    sentinel = fill.entries.front().score + 1.0;
  }
  std::vector<ScoredEntry> entries;
  entries.reserve(k);
  entries.push_back(ScoredEntry{summary.id, sentinel});
  for (const ScoredEntry& e : fill.entries) {
    if (entries.size() >= k) break;
    if (e.doc_id == summary.id) continue;
    entries.push_back(e);
  }
  return RankedList{query.id, std::move(entries), k};
}

}  // namespace raglab
