#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "raglab/corpus.hpp"
#include "raglab/hint.hpp"

namespace raglab {

struct PromptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variant {
  kNoRag,
  kRag,
  kSrag,
};

Variant parse_variant(const std::string& name);
std::string variant_name(Variant variant);

struct PromptSpec {
  Variant variant = Variant::kNoRag;
  std::vector<Document> context_docs;  // retrieval rank order, rank 1 first
  std::optional<Hint> hint;
  std::string question;
  bool include_titles = false;
};

/// Renders the fixed templates:
///   no-RAG:  "Question: {q}"
///   RAG:     "Context: {d1}\n{d2}\n... Question: {q}"
///   SRAG:    "Context: {hint}\n{d1}\n{d2}\n... Question: {q}"
/// Documents are joined by single newlines; the hint always carries a
/// trailing newline, so deleting "{hint}\n" from an SRAG prompt yields the
/// RAG prompt byte for byte. With include_titles each document renders as
/// "{title}\n{text}". Throws PromptError when the spec violates its variant
/// (no-RAG with context or hint, SRAG without hint, RAG with hint).
std::string build_prompt(const PromptSpec& spec);

/// Whitespace token count; used for budget warnings only, never truncation.
std::size_t prompt_token_estimate(const std::string& prompt);

}  // namespace raglab
