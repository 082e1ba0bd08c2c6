#pragma once

#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "raglab/corpus.hpp"

namespace raglab {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Retryable: timeouts, connection failures, HTTP 429/5xx.
struct TransientError : GenerationError {
  using GenerationError::GenerationError;
};
/// Not retryable: malformed responses, auth failures, other 4xx.
struct ProtocolError : GenerationError {
  using GenerationError::GenerationError;
};
/// The endpoint answered with an empty completion. Not retried.
struct EmptyCompletionError : GenerationError {
  using GenerationError::GenerationError;
};
/// Transient failures persisted through max_retries + 1 attempts.
struct RetriesExhaustedError : GenerationError {
  using GenerationError::GenerationError;
};
/// flatten/parse grammar violations.
struct QaFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;  // empty: no Authorization header
  int timeout_ms = 30000;
  int max_retries = 2;
  int max_concurrency = 4;
  double temperature = 0.0;
  int backoff_ms = 100;  // doubled per retry

  void validate() const;
};

struct QAPair {
  std::string question;
  std::string answer;
  std::string source_doc_id;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct GenerationResult {
  std::string prompt;
  std::string output_text;
  double latency_ms = 0.0;
  int attempts = 0;
};

/// One chat completion. Implementations throw TransientError or
/// ProtocolError; they never retry internally.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::string& model,
                               const std::string& prompt,
                               double temperature) = 0;
};

/// One embedding batch: one vector per input, order preserved.
class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual std::vector<std::vector<float>> embed(
      const std::string& model, const std::vector<std::string>& texts) = 0;
};

/// POSTs {model, messages:[{role:"user", content}], temperature} to
/// {base_url}/v1/chat/completions and returns choices[0].message.content.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::string base_url, std::string api_key_env,
                  int timeout_ms);
  std::string complete(const std::string& model, const std::string& prompt,
                       double temperature) override;

 private:
  std::string base_url_;
  std::string api_key_env_;
  int timeout_ms_;
};

/// POSTs {model, input:[...]} to {base_url}/v1/embeddings and returns
/// data[i].embedding in input order.
class HttpEmbedBackend : public EmbedBackend {
 public:
  HttpEmbedBackend(std::string base_url, std::string api_key_env,
                   int timeout_ms);
  std::vector<std::vector<float>> embed(
      const std::string& model, const std::vector<std::string>& texts) override;

 private:
  std::string base_url_;
  std::string api_key_env_;
  int timeout_ms_;
};

/// Mock: returns the prompt unchanged.
class EchoChatBackend : public ChatBackend {
 public:
  std::string complete(const std::string&, const std::string& prompt,
                       double) override {
    return prompt;
  }
};

/// Mock: returns a fixed string for every prompt.
class FixedChatBackend : public ChatBackend {
 public:
  explicit FixedChatBackend(std::string output) : output_(std::move(output)) {}
  std::string complete(const std::string&, const std::string&,
                       double) override {
    return output_;
  }

 private:
  std::string output_;
};

/// Mock: answers with material lifted from the prompt's context segment
/// (the text between "Context: " and " Question: ").
class ExtractiveChatBackend : public ChatBackend {
 public:
  enum class Scope {
    kContext,        // the whole context segment
    kFirstSentence,  // only its first sentence
  };

  explicit ExtractiveChatBackend(Scope scope) : scope_(scope) {}
  std::string complete(const std::string&, const std::string& prompt,
                       double) override;

 private:
  Scope scope_;
};

/// Mock: throws TransientError for the first `failures` calls, then delegates
/// to the payload backend. Thread-safe.
class FlakyChatBackend : public ChatBackend {
 public:
  FlakyChatBackend(int failures, std::shared_ptr<ChatBackend> payload)
      : remaining_(failures), payload_(std::move(payload)) {}
  std::string complete(const std::string& model, const std::string& prompt,
                       double temperature) override;
  int calls() const;

 private:
  mutable std::mutex mu_;
  int remaining_;
  int calls_ = 0;
  std::shared_ptr<ChatBackend> payload_;
};

/// Mock: deterministic bag-of-words embedding. Each token is FNV-1a hashed
/// into one of `dim` buckets with a hash-derived sign; the result is
/// L2-normalized. Equal texts always embed identically.
class HashEmbedBackend : public EmbedBackend {
 public:
  explicit HashEmbedBackend(std::size_t dim = 64) : dim_(dim) {}
  std::vector<std::vector<float>> embed(
      const std::string&, const std::vector<std::string>& texts) override;

  std::vector<float> embed_one(const std::string& text) const;

 private:
  std::size_t dim_;
};

/// Blocks callers once `limit` permits are out; releases on scope exit.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(int limit) : limit_(limit) {}

  class Permit {
   public:
    explicit Permit(ConcurrencyGate& gate);
    ~Permit();
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ConcurrencyGate& gate_;
  };

 private:
  friend class Permit;
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
};

/// Retry/backoff/concurrency wrapper around one chat backend and one embed
/// backend. Shareable across threads; at most max_concurrency requests are
/// in flight at a time.
class GenerationClient {
 public:
  GenerationClient(EndpointConfig config, std::shared_ptr<ChatBackend> chat,
                   std::shared_ptr<EmbedBackend> embed = nullptr);

  const EndpointConfig& config() const { return config_; }

  /// Transient failures retry up to max_retries times with exponential
  /// backoff; attempts ≤ max_retries + 1 always. An empty completion raises
  /// EmptyCompletionError without retry.
  GenerationResult generate_answer(const std::string& prompt);

  /// Same retry contract. Validates one vector per input and a uniform
  /// dimension across the batch.
  std::vector<std::vector<float>> embed_texts(
      const std::vector<std::string>& texts);

  /// Runs the QA-generation prompt over one document and parses the output
  /// into pairs. With consistency filtering (default on), pairs whose answer
  /// does not appear in the document text are dropped. Zero parsed pairs is
  /// a valid (empty) result, not an error.
  std::vector<QAPair> generate_qa_pairs(const Document& doc,
                                        const std::string& prompt_template,
                                        bool consistency_filter = true);

 private:
  template <typename Fn>
  auto with_retries(Fn&& fn) -> decltype(fn());

  EndpointConfig config_;
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbedBackend> embed_;
  ConcurrencyGate gate_;
};

/// Default QA-generation prompt. "{document}" is replaced by the document
/// text; the model is instructed to emit one "Q: ... / A: ..." line per pair.
extern const char kQaGenerationTemplate[];

/// Substitutes {document} in a template.
std::string render_qa_template(const std::string& prompt_template,
                               const Document& doc);

/// Parses model output into pairs. Accepts "Q: ... / A: ..." on one line and
/// the two-line "Q: ..." / "A: ..." form; everything else is ignored.
std::vector<QAPair> parse_qa_output(const std::string& output,
                                    const std::string& source_doc_id);

/// True when the answer appears in the document text (both sides lowercased
/// and whitespace-collapsed).
bool answer_consistent(const std::string& answer, const Document& doc);

/// "question: {q}, answer: {a}" joined by " | ". Throws QaFormatError if any
/// field contains the separator character '|'.
std::string flatten_qa_pairs(const std::vector<QAPair>& pairs);

/// Inverse of flatten_qa_pairs. Grammar errors carry the entry number and
/// byte offset. source_doc_id (not part of the flattened text) is stamped
/// onto every parsed pair.
std::vector<QAPair> parse_flattened(const std::string& text,
                                    const std::string& source_doc_id = {});

/// JSON Lines {"question","answer","source_doc_id"}.
std::vector<QAPair> load_qa_pairs(const std::string& path);
void save_qa_pairs(const std::vector<QAPair>& pairs, const std::string& path);

}  // namespace raglab
