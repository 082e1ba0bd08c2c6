#include "raglab/prompt.hpp"

#include "raglab/text.hpp"

namespace raglab {

Variant parse_variant(const std::string& name) {
  if (name == "no_rag") return Variant::kNoRag;
  if (name == "rag") return Variant::kRag;
  if (name == "srag") return Variant::kSrag;
  throw PromptError("unknown variant \"" + name + "\"");
}

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::kNoRag:
      return "no_rag";
    case Variant::kRag:
      return "rag";
    case Variant::kSrag:
      return "srag";
  }
  return "no_rag";
}

std::string build_prompt(const PromptSpec& spec) {
  if (spec.variant == Variant::kNoRag) {
    if (!spec.context_docs.empty()) {
      throw PromptError("no_rag prompt cannot carry context documents");
    }
    if (spec.hint) {
      throw PromptError("no_rag prompt cannot carry a hint");
    }
    return "Question: " + spec.question;
  }
  if (spec.variant == Variant::kSrag && !spec.hint) {
    throw PromptError("srag prompt requires a hint");
  }
  if (spec.variant == Variant::kRag && spec.hint) {
    throw PromptError("rag prompt cannot carry a hint");
  }

  std::string out = "Context: ";
  if (spec.variant == Variant::kSrag) {
    out += spec.hint->hint_text;
    out += '\n';
  }
  for (std::size_t i = 0; i < spec.context_docs.size(); ++i) {
    if (i > 0) out += '\n';
    const Document& doc = spec.context_docs[i];
    if (spec.include_titles) {
      out += doc.title;
      out += '\n';
    }
    out += doc.text;
  }
  out += " Question: ";
  out += spec.question;
  return out;
}

std::size_t prompt_token_estimate(const std::string& prompt) {
  return whitespace_token_count(prompt);
}

}  // namespace raglab
