#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace raglab {

struct ScoredEntry {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredEntry&, const ScoredEntry&) = default;
};

/// Ordered retrieval results. Entries are sorted by score descending with
/// ties broken by doc_id ascending, so the order is total and deterministic.
struct RankedList {
  std::string query_id;
  std::vector<ScoredEntry> entries;
  std::size_t k_requested = 0;

  bool contains(const std::string& doc_id) const {
    for (const auto& e : entries) {
      if (e.doc_id == doc_id) return true;
    }
    return false;
  }
};

/// The one tie rule used everywhere: score descending, doc_id ascending.
inline bool ranked_before(const ScoredEntry& a, const ScoredEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

/// Sorts entries with the tie rule and truncates to k.
inline void sort_and_truncate(std::vector<ScoredEntry>& entries, std::size_t k) {
  std::sort(entries.begin(), entries.end(), ranked_before);
  if (entries.size() > k) entries.resize(k);
}

}  // namespace raglab
