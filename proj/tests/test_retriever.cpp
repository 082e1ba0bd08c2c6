#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>
#include <string>
#include <vector>

#include "raglab/generation.hpp"
#include "raglab/kernels.hpp"
#include "raglab/retriever.hpp"

using namespace raglab;

namespace {

std::shared_ptr<const Corpus> entity_corpus() {
  std::vector<Document> docs;
  docs.push_back({"sum1", "E1", "Entity one is a painter from Ghent.", "e1", true});
  docs.push_back({"extra1", "E1x", "Entity one also sculpts in marble.", "e1", false});
  docs.push_back({"sum2", "E2", "Entity two is a composer from Oslo.", "e2", true});
  docs.push_back({"extra2", "E2x", "Entity two composes for piano.", "e2", false});
  docs.push_back({"plain", "P", "Unrelated filler about painters and piano.", std::nullopt, false});
  return std::make_shared<const Corpus>(std::move(docs));
}

QueryEncoder hash_encoder(std::size_t dim) {
  auto backend = std::make_shared<HashEmbedBackend>(dim);
  return [backend](const std::string& text) { return backend->embed_one(text); };
}

std::shared_ptr<const DenseIndex> hash_index(const Corpus& corpus, std::size_t dim) {
  HashEmbedBackend backend(dim);
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  for (const Document& doc : corpus.documents()) {
    rows.emplace_back(doc.id, backend.embed_one(doc.text));
  }
  return std::make_shared<const DenseIndex>(DenseIndex::build(rows));
}

}  // namespace

TEST_CASE("Bm25Retriever delegates to the index") {
  auto corpus = entity_corpus();
  auto index = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  const Bm25Retriever retriever(index);
  CHECK(retriever.name() == "bm25");

  const Query q{"q1", "painter from Ghent", std::nullopt};
  const RankedList got = retriever.retrieve(q, 3);
  const RankedList want = index->search(q.text, 3, {}, q.id);
  CHECK(got.query_id == "q1");
  REQUIRE(got.entries.size() == want.entries.size());
  for (std::size_t i = 0; i < got.entries.size(); ++i) {
    CHECK(got.entries[i].doc_id == want.entries[i].doc_id);
    CHECK(got.entries[i].score == want.entries[i].score);
  }
  CHECK(got.entries.front().doc_id == "sum1");
}

TEST_CASE("DenseRetriever encodes the query then searches") {
  kernels::set_backend(kernels::Backend::kScalar);
  auto corpus = entity_corpus();
  auto index = hash_index(*corpus, 32);
  const DenseRetriever retriever(index, hash_encoder(32));
  CHECK(retriever.name() == "dense");

  const Query q{"q1", "composer from Oslo", std::nullopt};
  const RankedList got = retriever.retrieve(q, 2);
  HashEmbedBackend backend(32);
  const RankedList want = index->search(backend.embed_one(q.text), 2, q.id);
  REQUIRE(got.entries.size() == want.entries.size());
  for (std::size_t i = 0; i < got.entries.size(); ++i) {
    CHECK(got.entries[i].doc_id == want.entries[i].doc_id);
    CHECK(got.entries[i].score == want.entries[i].score);
  }
}

TEST_CASE("RerankRetriever narrows by BM25 then rescores densely") {
  kernels::set_backend(kernels::Backend::kScalar);
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  auto dense = hash_index(*corpus, 32);

  const RerankRetriever retriever(sparse, dense, hash_encoder(32), 100);
  CHECK(retriever.name() == "rerank");
  const Query q{"q1", "painter marble Ghent", std::nullopt};
  const RankedList got = retriever.retrieve(q, 3);

  // Depth 100 covers every BM25 match, so the result is the dense ranking of
  // exactly the BM25-matched candidates.
  const RankedList first = sparse->search(q.text, 100, {}, q.id);
  std::vector<std::string> candidates;
  for (const auto& e : first.entries) candidates.push_back(e.doc_id);
  HashEmbedBackend backend(32);
  const RankedList want = dense->rerank(backend.embed_one(q.text), candidates, 3, q.id);
  REQUIRE(got.entries.size() == want.entries.size());
  for (std::size_t i = 0; i < got.entries.size(); ++i) {
    CHECK(got.entries[i].doc_id == want.entries[i].doc_id);
    CHECK(got.entries[i].score == want.entries[i].score);
  }
}

TEST_CASE("RerankRetriever first-stage depth caps the candidate pool") {
  kernels::set_backend(kernels::Backend::kScalar);
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  auto dense = hash_index(*corpus, 32);

  const Query q{"q", "painters piano", std::nullopt};
  const RankedList full = sparse->search(q.text, 100);
  REQUIRE(full.entries.size() >= 2);

  const RerankRetriever narrow(sparse, dense, hash_encoder(32), 1);
  const RankedList got = narrow.retrieve(q, 5);
  // Only the single BM25 winner survives stage one.
  REQUIRE(got.entries.size() == 1);
  CHECK(got.entries[0].doc_id == full.entries[0].doc_id);
}

TEST_CASE("ideal_retrieve pins the summary at rank 1") {
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  const Bm25Retriever fallback(sparse);

  Query q{"q1", "painter from Ghent", "e1"};
  const RankedList got = ideal_retrieve(*corpus, q, 3, fallback);
  REQUIRE(!got.entries.empty());
  CHECK(got.entries[0].doc_id == "sum1");
  // Sentinel score sits one above the best fallback score.
  const RankedList fb = fallback.retrieve(q, 3);
  CHECK(got.entries[0].score == fb.entries[0].score + 1.0);
  // Sorted order is preserved.
  for (std::size_t i = 1; i < got.entries.size(); ++i) {
    CHECK(ranked_before(got.entries[i - 1], got.entries[i]));
  }
  // The summary never repeats lower down.
  for (std::size_t i = 1; i < got.entries.size(); ++i) {
    CHECK(got.entries[i].doc_id != "sum1");
  }
}

TEST_CASE("ideal_retrieve fills ranks 2..k from the fallback minus the summary") {
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  const Bm25Retriever fallback(sparse);

  Query q{"q1", "painter from Ghent", "e1"};
  const RankedList got = ideal_retrieve(*corpus, q, 3, fallback);
  const RankedList fb = fallback.retrieve(q, 3);
  std::vector<std::string> fb_rest;
  for (const auto& e : fb.entries) {
    if (e.doc_id != "sum1") fb_rest.push_back(e.doc_id);
  }
  REQUIRE(got.entries.size() >= 2);
  for (std::size_t i = 1; i < got.entries.size(); ++i) {
    CHECK(got.entries[i].doc_id == fb_rest[i - 1]);
  }
}

TEST_CASE("ideal_retrieve with an empty fallback uses sentinel 1.0") {
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  const Bm25Retriever fallback(sparse);

  Query q{"q1", "zzz qqq vvv", "e2"};  // matches nothing
  const RankedList got = ideal_retrieve(*corpus, q, 3, fallback);
  REQUIRE(got.entries.size() == 1);
  CHECK(got.entries[0].doc_id == "sum2");
  CHECK(got.entries[0].score == 1.0);
}

TEST_CASE("ideal_retrieve edge cases") {
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  const Bm25Retriever fallback(sparse);

  Query no_entity{"q", "anything", std::nullopt};
  CHECK_THROWS_AS((void)ideal_retrieve(*corpus, no_entity, 3, fallback),
                  RetrievalError);

  Query ghost{"q", "anything", "ghost"};
  CHECK_THROWS_AS((void)ideal_retrieve(*corpus, ghost, 3, fallback),
                  CorpusError);

  Query ok{"q", "painter", "e1"};
  CHECK(ideal_retrieve(*corpus, ok, 0, fallback).entries.empty());
  const RankedList one = ideal_retrieve(*corpus, ok, 1, fallback);
  REQUIRE(one.entries.size() == 1);
  CHECK(one.entries[0].doc_id == "sum1");
}

TEST_CASE("IdealRetriever wraps ideal_retrieve") {
  auto corpus = entity_corpus();
  auto sparse = std::make_shared<const SparseIndex>(SparseIndex::build(*corpus));
  IdealRetriever retriever(corpus, std::make_unique<Bm25Retriever>(sparse));
  CHECK(retriever.name() == "ideal");

  const Query q{"q1", "composer from Oslo", "e2"};
  const RankedList got = retriever.retrieve(q, 2);
  REQUIRE(!got.entries.empty());
  CHECK(got.entries[0].doc_id == "sum2");
}
