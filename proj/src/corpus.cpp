#include "raglab/corpus.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <string_view>

#include "json.hpp"

#include "raglab/text.hpp"

namespace raglab {

namespace {

using json = nlohmann::json;

// Final tokens that keep a trailing '.' from ending a sentence.
constexpr std::array<std::string_view, 15> kAbbreviations = {
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.",
    "Fig.", "No.", "etc.", "vs.", "e.g.", "i.e.", "al.",
};

bool is_abbreviation(std::string_view token) {
  for (auto abbr : kAbbreviations) {
    if (token == abbr) return true;
  }
  return false;
}

bool is_upper_or_digit(unsigned char c) {
  return std::isupper(c) != 0 || std::isdigit(c) != 0;
}

std::string line_error(const std::string& path, std::size_t line_no,
                       const std::string& what) {
  return path + ":" + std::to_string(line_no) + ": " + what;
}

}  // namespace

Corpus::Corpus(std::vector<Document> documents) : docs_(std::move(documents)) {
  by_id_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const Document& doc = docs_[i];
    if (!by_id_.emplace(doc.id, i).second) {
      throw CorpusError("duplicate doc_id \"" + doc.id + "\"");
    }
    if (doc.entity_id) {
      entities_.insert(*doc.entity_id);
      if (doc.is_summary) {
        auto [it, inserted] = entity_summary_.emplace(*doc.entity_id, doc.id);
        if (!inserted) {
          throw CorpusError("entity \"" + *doc.entity_id +
                            "\" has two summary documents: \"" + it->second +
                            "\" and \"" + doc.id + "\"");
        }
      }
    }
  }
}

bool Corpus::contains(const std::string& doc_id) const {
  return by_id_.count(doc_id) > 0;
}

const Document& Corpus::get(const std::string& doc_id) const {
  auto it = by_id_.find(doc_id);
  if (it == by_id_.end()) {
    throw CorpusError("unknown doc_id \"" + doc_id + "\"");
  }
  return docs_[it->second];
}

const Document& Corpus::summary_for(const std::string& entity_id) const {
  auto it = entity_summary_.find(entity_id);
  if (it == entity_summary_.end()) {
    if (entities_.count(entity_id) == 0) {
      throw CorpusError("unknown entity_id \"" + entity_id + "\"");
    }
    throw CorpusError("entity \"" + entity_id + "\" has no summary document");
  }
  return get(it->second);
}

bool Corpus::has_summary(const std::string& entity_id) const {
  return entity_summary_.count(entity_id) > 0;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CorpusError("cannot open corpus file: " + path);
  }
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(line_error(path, line_no, std::string("invalid JSON: ") + e.what()));
    }
    Document doc;
    try {
      doc.id = rec.at("id").get<std::string>();
      doc.title = rec.value("title", std::string{});
      doc.text = normalize_whitespace(rec.at("text").get<std::string>());
      if (rec.contains("entity_id") && !rec["entity_id"].is_null()) {
        doc.entity_id = rec["entity_id"].get<std::string>();
      }
      doc.is_summary = rec.value("is_summary", false);
    } catch (const json::exception& e) {
      throw CorpusError(line_error(path, line_no, std::string("bad record: ") + e.what()));
    }
    if (doc.text.empty()) {
      throw CorpusError(line_error(path, line_no,
                                   "document \"" + doc.id + "\" has empty text"));
    }
    docs.push_back(std::move(doc));
  }
  try {
    return Corpus(std::move(docs));
  } catch (const CorpusError& e) {
    throw CorpusError(path + ": " + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw CorpusError("cannot write corpus file: " + path);
  }
  for (const Document& doc : corpus.documents()) {
    json rec{
        {"id", doc.id},
        {"title", doc.title},
        {"text", doc.text},
        {"entity_id", doc.entity_id ? json(*doc.entity_id) : json(nullptr)},
        {"is_summary", doc.is_summary},
    };
    out << rec.dump() << '\n';
  }
}

std::vector<Sentence> split_sentences(std::string_view text,
                                      const std::string& doc_id) {
  const std::string norm = normalize_whitespace(text);
  std::vector<Sentence> sentences;
  if (norm.empty()) return sentences;

  std::size_t start = 0;
  std::size_t last_space = std::string::npos;  // most recent space before i
  for (std::size_t i = 0; i + 2 < norm.size(); ++i) {
    const char c = norm[i];
    if (c == ' ') {
      last_space = i;
      continue;
    }
    const bool terminal = (c == '.' || c == '!' || c == '?');
    if (!terminal || norm[i + 1] != ' ' ||
        !is_upper_or_digit(static_cast<unsigned char>(norm[i + 2]))) {
      continue;
    }
    if (c == '.') {
      const std::size_t tok_start =
          (last_space == std::string::npos || last_space < start) ? start
                                                                  : last_space + 1;
      std::string_view token(norm.data() + tok_start, i - tok_start + 1);
      if (is_abbreviation(token)) continue;
    }
    sentences.push_back(Sentence{norm.substr(start, i - start + 1), doc_id,
                                 sentences.size()});
    start = i + 2;
  }
  sentences.push_back(Sentence{norm.substr(start), doc_id, sentences.size()});
  return sentences;
}

std::vector<Sentence> split_sentences(const Document& doc) {
  return split_sentences(doc.text, doc.id);
}

}  // namespace raglab
