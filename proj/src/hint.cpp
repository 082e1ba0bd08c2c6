#include "raglab/hint.hpp"

#include <algorithm>
#include <cstdio>

#include "raglab/kernels.hpp"
#include "raglab/text.hpp"

namespace raglab {

HintMode parse_hint_mode(const std::string& name) {
  if (name == "S" || name == "s" || name == "sentence") {
    return HintMode::kSentence;
  }
  if (name == "D" || name == "d" || name == "document") {
    return HintMode::kDocument;
  }
  throw HintError("unknown hint mode \"" + name + "\"");
}

std::string hint_mode_name(HintMode mode) {
  return mode == HintMode::kSentence ? "S" : "D";
}

std::string sentence_key(const std::string& doc_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return doc_id + "#" + buf;
}

std::vector<double> Bm25SentenceRanker::score_all(
    const std::string& question, const std::vector<Sentence>& sentences) const {
  std::vector<std::pair<std::string, std::string>> units;
  units.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    units.emplace_back(sentence_key(s.doc_id, s.index), s.text);
  }
  const SparseIndex pool = SparseIndex::build_units(units);
  const std::vector<std::string> terms = tokenize(question);
  std::vector<double> scores;
  scores.reserve(sentences.size());
  for (const auto& [key, text] : units) {
    scores.push_back(pool.score(terms, key, params_));
  }
  return scores;
}

std::vector<double> DenseSentenceRanker::score_all(
    const std::string& question, const std::vector<Sentence>& sentences) const {
  std::vector<std::string> texts;
  texts.reserve(sentences.size() + 1);
  texts.push_back(question);
  for (const Sentence& s : sentences) texts.push_back(s.text);
  const std::vector<std::vector<float>> vecs = encoder_(texts);
  if (vecs.size() != texts.size()) {
    throw HintError("encoder returned " + std::to_string(vecs.size()) +
                    " vectors for " + std::to_string(texts.size()) + " inputs");
  }
  std::vector<double> scores;
  scores.reserve(sentences.size());
  for (std::size_t i = 1; i < vecs.size(); ++i) {
    if (vecs[i].size() != vecs[0].size()) {
      throw HintError("encoder returned mixed-dimension vectors");
    }
    scores.push_back(kernels::dot(vecs[0], vecs[i]));
  }
  return scores;
}

RankedList score_sentences(const std::string& question,
                           const std::vector<Sentence>& sentences,
                           const SentenceRanker& ranker) {
  if (sentences.empty()) {
    throw HintError("no candidate sentences");
  }
  const std::vector<double> scores = ranker.score_all(question, sentences);
  std::vector<ScoredEntry> entries;
  entries.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    entries.push_back(
        ScoredEntry{sentence_key(sentences[i].doc_id, sentences[i].index),
                    scores[i]});
  }
  sort_and_truncate(entries, entries.size());
  return RankedList{question, std::move(entries), sentences.size()};
}

Hint extract_hint(const std::string& question,
                  const std::vector<Document>& top_docs,
                  const SentenceRanker& ranker, HintMode mode) {
  if (top_docs.empty()) {
    throw HintError("extract_hint called with no documents");
  }
  std::vector<Sentence> pool;
  std::vector<std::size_t> doc_rank;  // parallel to pool
  for (std::size_t rank = 0; rank < top_docs.size(); ++rank) {
    const Document& doc = top_docs[rank];
    std::vector<Sentence> sentences = split_sentences(doc.text, doc.id);
    if (sentences.empty()) {
      throw HintError("document \"" + doc.id + "\" has no sentences");
    }
    for (Sentence& s : sentences) {
      pool.push_back(std::move(s));
      doc_rank.push_back(rank);
    }
  }
  const std::vector<double> scores = ranker.score_all(question, pool);

  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (scores[i] > scores[best]) {
      best = i;
    } else if (scores[i] == scores[best]) {
      // Ties favor the higher-ranked document, then the earlier sentence.
      if (doc_rank[i] < doc_rank[best] ||
          (doc_rank[i] == doc_rank[best] && pool[i].index < pool[best].index)) {
        best = i;
      }
    }
  }

  Hint hint;
  hint.mode = mode;
  hint.sentence = pool[best];
  hint.source_doc_id = pool[best].doc_id;
  hint.hint_text = mode == HintMode::kSentence
                       ? pool[best].text
                       : top_docs[doc_rank[best]].text;
  return hint;
}

}  // namespace raglab
