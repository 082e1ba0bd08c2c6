#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "raglab/ranked.hpp"
#include "raglab/sparse.hpp"

namespace raglab {

/// Doc-id keyed store of fixed-dimension float vectors, laid out contiguously
/// with rows sorted by doc_id. Immutable after build.
class DenseIndex {
 public:
  DenseIndex() = default;

  /// Validates every vector: uniform dimension, finite values, unique ids.
  /// Throws IndexError on violation.
  static DenseIndex build(
      const std::vector<std::pair<std::string, std::vector<float>>>& rows);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(const std::string& doc_id) const;

  /// Row view for one document. Throws IndexError for an unknown id.
  std::span<const float> vector(const std::string& doc_id) const;

  /// Dot-product score of the query against one document.
  double score(std::span<const float> query, const std::string& doc_id) const;

  /// Exhaustive top-k by dot product over all rows, RankedList tie rule.
  RankedList search(std::span<const float> query, std::size_t k,
                    const std::string& query_id = {}) const;

  /// Rescores an explicit candidate set by dot product, then sorts and
  /// truncates to k. Every candidate must be present in the index.
  RankedList rerank(std::span<const float> query,
                    const std::vector<std::string>& candidates, std::size_t k,
                    const std::string& query_id = {}) const;

 private:
  DenseIndex(std::vector<std::string> ids, std::vector<float> data,
             std::size_t dim)
      : ids_(std::move(ids)), data_(std::move(data)), dim_(dim) {}

  std::size_t row_of(const std::string& doc_id) const;

  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::size_t dim_ = 0;
};

/// JSON Lines vector files: one {"id": ..., "vector": [...]} object per line.
std::vector<std::pair<std::string, std::vector<float>>> load_vectors(
    const std::string& path);
void save_vectors(
    const std::vector<std::pair<std::string, std::vector<float>>>& rows,
    const std::string& path);

}  // namespace raglab
