#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "raglab/corpus.hpp"
#include "raglab/ranked.hpp"

namespace raglab {

struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::string doc_id;
  std::uint32_t term_frequency = 0;
};

/// Inverted index over tokenized document text. Immutable after build; all
/// lookups are pure reads.
class SparseIndex {
 public:
  SparseIndex() = default;

  /// Indexes every document's text. Deterministic for a given corpus:
  /// posting lists are sorted by doc_id.
  static SparseIndex build(const Corpus& corpus);

  /// Indexes arbitrary (id, text) units; used for sentence-level ranking.
  static SparseIndex build_units(
      const std::vector<std::pair<std::string, std::string>>& units);

  std::size_t doc_count() const { return doc_count_; }
  double avg_doc_length() const { return avg_doc_length_; }
  const std::unordered_map<std::string, std::size_t>& doc_lengths() const {
    return doc_lengths_;
  }
  const std::unordered_map<std::string, std::vector<Posting>>& postings() const {
    return postings_;
  }

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); > 0 whenever the term occurs.
  double idf(const std::string& term) const;

  /// BM25 score of one document for the given query terms. Throws IndexError
  /// for a doc_id the index does not know.
  double score(const std::vector<std::string>& query_terms,
               const std::string& doc_id, const Bm25Params& params = {}) const;

  /// Top-k BM25 search: exactly the documents with score > 0, sorted by the
  /// RankedList tie rule and truncated to k.
  RankedList search(const std::string& query, std::size_t k,
                    const Bm25Params& params = {},
                    const std::string& query_id = {}) const;

 private:
  SparseIndex(std::unordered_map<std::string, std::vector<Posting>> postings,
              std::unordered_map<std::string, std::size_t> doc_lengths,
              double avg_doc_length, std::size_t doc_count)
      : postings_(std::move(postings)),
        doc_lengths_(std::move(doc_lengths)),
        avg_doc_length_(avg_doc_length),
        doc_count_(doc_count) {}

  static SparseIndex build_from_tokens(
      const std::vector<std::pair<std::string, std::vector<std::string>>>& docs);

  friend SparseIndex load_sparse_index(const std::string& path);

  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::size_t doc_count_ = 0;

  double term_doc_score(const Posting& posting, double idf_value,
                        const Bm25Params& params) const;
};

/// Writes/reads the index as a deterministic JSON artifact.
void save_sparse_index(const SparseIndex& index, const std::string& path);
SparseIndex load_sparse_index(const std::string& path);

}  // namespace raglab
