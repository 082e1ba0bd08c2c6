#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "raglab/corpus.hpp"
#include "raglab/dense.hpp"
#include "raglab/ranked.hpp"
#include "raglab/sparse.hpp"

namespace raglab {

struct RetrievalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// What a retriever sees of a QA instance. entity_id is only needed by the
/// oracle backend.
struct Query {
  std::string id;
  std::string text;
  std::optional<std::string> entity_id;
};

/// Maps query text to an embedding; supplied by the embedding client or a
/// precomputed table.
using QueryEncoder = std::function<std::vector<float>(const std::string&)>;

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual RankedList retrieve(const Query& query, std::size_t k) const = 0;
  virtual std::string name() const = 0;
};

class Bm25Retriever : public Retriever {
 public:
  Bm25Retriever(std::shared_ptr<const SparseIndex> index, Bm25Params params = {})
      : index_(std::move(index)), params_(params) {}

  RankedList retrieve(const Query& query, std::size_t k) const override {
    return index_->search(query.text, k, params_, query.id);
  }
  std::string name() const override { return "bm25"; }

 private:
  std::shared_ptr<const SparseIndex> index_;
  Bm25Params params_;
};

class DenseRetriever : public Retriever {
 public:
  DenseRetriever(std::shared_ptr<const DenseIndex> index, QueryEncoder encoder)
      : index_(std::move(index)), encoder_(std::move(encoder)) {}

  RankedList retrieve(const Query& query, std::size_t k) const override;
  std::string name() const override { return "dense"; }

 private:
  std::shared_ptr<const DenseIndex> index_;
  QueryEncoder encoder_;
};

/// BM25 first stage feeding a dense rescoring pass.
class RerankRetriever : public Retriever {
 public:
  RerankRetriever(std::shared_ptr<const SparseIndex> sparse,
                  std::shared_ptr<const DenseIndex> dense, QueryEncoder encoder,
                  std::size_t first_stage_depth = 100, Bm25Params params = {})
      : sparse_(std::move(sparse)),
        dense_(std::move(dense)),
        encoder_(std::move(encoder)),
        first_stage_depth_(first_stage_depth),
        params_(params) {}

  RankedList retrieve(const Query& query, std::size_t k) const override;
  std::string name() const override { return "rerank"; }

 private:
  std::shared_ptr<const SparseIndex> sparse_;
  std::shared_ptr<const DenseIndex> dense_;
  QueryEncoder encoder_;
  std::size_t first_stage_depth_;
  Bm25Params params_;
};

/// Rank 1 is always the query entity's summary document, carrying a sentinel
/// score one above the best fallback score so the list stays sorted. Ranks
/// 2..k come from the fallback retriever with the summary excluded.
RankedList ideal_retrieve(const Corpus& corpus, const Query& query,
                          std::size_t k, const Retriever& fallback);

class IdealRetriever : public Retriever {
 public:
  IdealRetriever(std::shared_ptr<const Corpus> corpus,
                 std::unique_ptr<Retriever> fallback)
      : corpus_(std::move(corpus)), fallback_(std::move(fallback)) {}

  RankedList retrieve(const Query& query, std::size_t k) const override {
    return ideal_retrieve(*corpus_, query, k, *fallback_);
  }
  std::string name() const override { return "ideal"; }

 private:
  std::shared_ptr<const Corpus> corpus_;
  std::unique_ptr<Retriever> fallback_;
};

}  // namespace raglab
