#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace raglab {

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One retrievable text unit. `text` is whitespace-normalized at load time.
struct Document {
  std::string id;
  std::string title;
  std::string text;
  std::optional<std::string> entity_id;
  bool is_summary = false;
};

/// One sentence of a document, produced by split_sentences.
struct Sentence {
  std::string text;
  std::string doc_id;
  std::size_t index = 0;  // 0-based position within the document
};

/// Immutable after load; safe for unrestricted concurrent reads.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }

  bool contains(const std::string& doc_id) const;
  const Document& get(const std::string& doc_id) const;

  /// The unique summary document for an entity. Throws CorpusError if the
  /// entity is unknown or has no summary document.
  const Document& summary_for(const std::string& entity_id) const;
  bool has_summary(const std::string& entity_id) const;

  const std::unordered_map<std::string, std::string>& by_entity_summary() const {
    return entity_summary_;
  }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::string> entity_summary_;  // entity -> doc id
  std::unordered_set<std::string> entities_;
};

/// Reads a JSON Lines corpus file:
///   {"id": str, "title": str, "text": str, "entity_id": str|null, "is_summary": bool}
/// Text is whitespace-normalized. Throws CorpusError (with the line number)
/// on malformed records, duplicate ids, empty text, or a second summary
/// document for the same entity.
Corpus load_corpus(const std::string& path);

/// Writes the corpus back out in the same JSON Lines format.
void save_corpus(const Corpus& corpus, const std::string& path);

/// Rule-based sentence segmentation. A sentence ends at '.', '!' or '?'
/// followed by a space and an uppercase letter or digit, except when the
/// final token before a '.' is one of the published abbreviations
/// (see kAbbreviations in corpus.cpp): Dr. Mr. Mrs. Ms. Prof. St. Jr. Sr.
/// Fig. No. etc. vs. e.g. i.e. al.
/// Input is whitespace-normalized first; joining the result with single
/// spaces reproduces the normalized input exactly.
std::vector<Sentence> split_sentences(std::string_view text,
                                      const std::string& doc_id = {});

/// The document's sentences (text already normalized at load).
std::vector<Sentence> split_sentences(const Document& doc);

}  // namespace raglab
