#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "raglab/corpus.hpp"
#include "raglab/ranked.hpp"
#include "raglab/sparse.hpp"

namespace raglab {

struct HintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class HintMode {
  kSentence,  // S: hint is the selected sentence
  kDocument,  // D: hint is the full document containing it
};

HintMode parse_hint_mode(const std::string& name);
std::string hint_mode_name(HintMode mode);

/// The stimulus prepended to the prompt context.
struct Hint {
  HintMode mode = HintMode::kSentence;
  Sentence sentence;
  std::string source_doc_id;
  std::string hint_text;
};

/// Scores every candidate sentence against the question. Implementations
/// must be pure: no observable state between calls.
class SentenceRanker {
 public:
  virtual ~SentenceRanker() = default;
  virtual std::vector<double> score_all(
      const std::string& question,
      const std::vector<Sentence>& sentences) const = 0;
  virtual std::string name() const = 0;
};

/// BM25 over the candidate pool itself: document statistics are recomputed
/// per pool, so scores depend on which sentences are present.
class Bm25SentenceRanker : public SentenceRanker {
 public:
  explicit Bm25SentenceRanker(Bm25Params params = {}) : params_(params) {}
  std::vector<double> score_all(
      const std::string& question,
      const std::vector<Sentence>& sentences) const override;
  std::string name() const override { return "bm25"; }

 private:
  Bm25Params params_;
};

/// Dot product between the question embedding and each sentence embedding.
/// Pool-independent: a sentence's score never depends on its neighbors.
class DenseSentenceRanker : public SentenceRanker {
 public:
  using BatchEncoder =
      std::function<std::vector<std::vector<float>>(const std::vector<std::string>&)>;

  explicit DenseSentenceRanker(BatchEncoder encoder)
      : encoder_(std::move(encoder)) {}
  std::vector<double> score_all(
      const std::string& question,
      const std::vector<Sentence>& sentences) const override;
  std::string name() const override { return "dense"; }

 private:
  BatchEncoder encoder_;
};

/// Stable key for a sentence inside a RankedList. The index is zero-padded
/// so lexicographic key order equals (doc_id, index) order.
std::string sentence_key(const std::string& doc_id, std::size_t index);

/// Ranks the candidate sentences: score descending, ties by (doc_id, index)
/// ascending. Entry doc_ids are sentence_key strings.
RankedList score_sentences(const std::string& question,
                           const std::vector<Sentence>& sentences,
                           const SentenceRanker& ranker);

/// Selects the top-scoring sentence across the top-K documents. Ties break
/// by (document rank in top_docs, sentence index) ascending. top_docs must
/// be in retrieval rank order.
Hint extract_hint(const std::string& question,
                  const std::vector<Document>& top_docs,
                  const SentenceRanker& ranker, HintMode mode);

}  // namespace raglab
