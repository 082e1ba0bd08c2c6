#include "raglab/dense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "raglab/kernels.hpp"

namespace raglab {

using json = nlohmann::json;

DenseIndex DenseIndex::build(
    const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  if (rows.empty()) {
    return DenseIndex({}, {}, 0);
  }
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&rows](std::size_t a, std::size_t b) {
    return rows[a].first < rows[b].first;
  });

  const std::size_t dim = rows.front().second.size();
  if (dim == 0) {
    throw IndexError("vector for \"" + rows.front().first + "\" is empty");
  }
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(rows.size());
  data.reserve(rows.size() * dim);
  for (std::size_t idx : order) {
    const auto& [id, vec] = rows[idx];
    if (!ids.empty() && ids.back() == id) {
      throw IndexError("duplicate vector id \"" + id + "\"");
    }
    if (vec.size() != dim) {
      throw IndexError("vector for \"" + id + "\" has dimension " +
                       std::to_string(vec.size()) + ", expected " +
                       std::to_string(dim));
    }
    for (float v : vec) {
      if (!std::isfinite(v)) {
        throw IndexError("vector for \"" + id + "\" has a non-finite value");
      }
    }
    ids.push_back(id);
    data.insert(data.end(), vec.begin(), vec.end());
  }
  return DenseIndex(std::move(ids), std::move(data), dim);
}

std::size_t DenseIndex::row_of(const std::string& doc_id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), doc_id);
  if (it == ids_.end() || *it != doc_id) {
    throw IndexError("unknown doc_id \"" + doc_id + "\"");
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

bool DenseIndex::contains(const std::string& doc_id) const {
  return std::binary_search(ids_.begin(), ids_.end(), doc_id);
}

std::span<const float> DenseIndex::vector(const std::string& doc_id) const {
  return {data_.data() + row_of(doc_id) * dim_, dim_};
}

double DenseIndex::score(std::span<const float> query,
                         const std::string& doc_id) const {
  if (query.size() != dim_) {
    throw IndexError("query has dimension " + std::to_string(query.size()) +
                     ", expected " + std::to_string(dim_));
  }
  return kernels::dot(query, vector(doc_id));
}

RankedList DenseIndex::search(std::span<const float> query, std::size_t k,
                              const std::string& query_id) const {
  if (query.size() != dim_) {
    throw IndexError("query has dimension " + std::to_string(query.size()) +
                     ", expected " + std::to_string(dim_));
  }
  std::vector<double> scores(ids_.size());
  kernels::batch_dot(query, data_.data(), ids_.size(), dim_, scores.data());
  std::vector<ScoredEntry> entries;
  entries.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    entries.push_back(ScoredEntry{ids_[i], scores[i]});
  }
  sort_and_truncate(entries, k);
  return RankedList{query_id, std::move(entries), k};
}

RankedList DenseIndex::rerank(std::span<const float> query,
                              const std::vector<std::string>& candidates,
                              std::size_t k,
                              const std::string& query_id) const {
  std::vector<ScoredEntry> entries;
  entries.reserve(candidates.size());
  for (const std::string& doc_id : candidates) {
    entries.push_back(ScoredEntry{doc_id, score(query, doc_id)});
  }
  sort_and_truncate(entries, k);
  return RankedList{query_id, std::move(entries), k};
}

std::vector<std::pair<std::string, std::vector<float>>> load_vectors(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IndexError("cannot open vector file: " + path);
  }
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IndexError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      rows.emplace_back(obj.at("id").get<std::string>(),
                        obj.at("vector").get<std::vector<float>>());
    } catch (const json::exception& e) {
      throw IndexError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void save_vectors(
    const std::vector<std::pair<std::string, std::vector<float>>>& rows,
    const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IndexError("cannot write vector file: " + path);
  }
  for (const auto& [id, vec] : rows) {
    json obj{{"id", id}, {"vector", vec}};
    out << obj.dump() << '\n';
  }
}

}  // namespace raglab
