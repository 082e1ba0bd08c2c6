#include "raglab/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string_view>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "raglab/text.hpp"

namespace raglab {

using json = nlohmann::json;

const char kQaGenerationTemplate[] =
    "Read the document, then produce question-answer pairs.\n"
    "Step 1: list the distinct facts the document states.\n"
    "Step 2: write one question for each fact.\n"
    "Step 3: answer each question with an exact span copied from the "
    "document.\n"
    "Generate as many pairs as the document supports.\n"
    "Document: {document}\n"
    "After your reasoning, output one line per pair, exactly in this form:\n"
    "Q: <question> / A: <answer>";

void EndpointConfig::validate() const {
  if (max_retries < 0) {
    throw std::invalid_argument("max_retries must be >= 0");
  }
  if (max_concurrency < 1) {
    throw std::invalid_argument("max_concurrency must be >= 1");
  }
  if (temperature < 0.0) {
    throw std::invalid_argument("temperature must be >= 0");
  }
  if (timeout_ms <= 0) {
    throw std::invalid_argument("timeout_ms must be > 0");
  }
  if (backoff_ms < 0) {
    throw std::invalid_argument("backoff_ms must be >= 0");
  }
}

namespace {

std::string resolve_api_key(const std::string& api_key_env) {
  if (api_key_env.empty()) return {};
  const char* value = std::getenv(api_key_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw ProtocolError("environment variable " + api_key_env +
                        " is not set");
  }
  return value;
}

httplib::Client make_http_client(const std::string& base_url, int timeout_ms) {
  httplib::Client cli(base_url);
  const time_t sec = timeout_ms / 1000;
  const time_t usec = static_cast<time_t>(timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  return cli;
}

httplib::Headers auth_headers(const std::string& api_key_env) {
  httplib::Headers headers;
  const std::string key = resolve_api_key(api_key_env);
  if (!key.empty()) {
    headers.emplace("Authorization", "Bearer " + key);
  }
  return headers;
}

json post_json(const std::string& base_url, const std::string& api_key_env,
               int timeout_ms, const std::string& path, const json& body,
               const char* what) {
  httplib::Client cli = make_http_client(base_url, timeout_ms);
  auto res = cli.Post(path, auth_headers(api_key_env), body.dump(),
                      "application/json");
  if (!res) {
    throw TransientError(std::string(what) + " endpoint unreachable: " +
                         httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientError(std::string(what) + " endpoint returned HTTP " +
                         std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProtocolError(std::string(what) + " endpoint returned HTTP " +
                        std::to_string(res->status) + ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string(what) + " response is not JSON: " +
                        e.what());
  }
}

std::string trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && (s[begin] == ' ' || s[begin] == '\t')) ++begin;
  while (end > begin && (s[end - 1] == ' ' || s[end - 1] == '\t' ||
                         s[end - 1] == '\r')) {
    --end;
  }
  return std::string(s.substr(begin, end - begin));
}

}  // namespace

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key_env,
                                 int timeout_ms)
    : base_url_(std::move(base_url)),
      api_key_env_(std::move(api_key_env)),
      timeout_ms_(timeout_ms) {}

std::string HttpChatBackend::complete(const std::string& model,
                                      const std::string& prompt,
                                      double temperature) {
  const json body{
      {"model", model},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
      {"temperature", temperature},
  };
  const json response = post_json(base_url_, api_key_env_, timeout_ms_,
                                  "/v1/chat/completions", body, "chat");
  try {
    return response.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed chat response: ") + e.what());
  }
}

HttpEmbedBackend::HttpEmbedBackend(std::string base_url,
                                   std::string api_key_env, int timeout_ms)
    : base_url_(std::move(base_url)),
      api_key_env_(std::move(api_key_env)),
      timeout_ms_(timeout_ms) {}

std::vector<std::vector<float>> HttpEmbedBackend::embed(
    const std::string& model, const std::vector<std::string>& texts) {
  const json body{{"model", model}, {"input", texts}};
  const json response = post_json(base_url_, api_key_env_, timeout_ms_,
                                  "/v1/embeddings", body, "embedding");
  try {
    std::vector<std::vector<float>> out;
    for (const auto& item : response.at("data")) {
      out.push_back(item.at("embedding").get<std::vector<float>>());
    }
    return out;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed embedding response: ") +
                        e.what());
  }
}

std::string ExtractiveChatBackend::complete(const std::string&,
                                            const std::string& prompt,
                                            double) {
  constexpr std::string_view kContextMarker = "Context: ";
  constexpr std::string_view kQuestionMarker = " Question: ";
  if (prompt.rfind(kContextMarker, 0) != 0) {
    return prompt;
  }
  // The question is the suffix after the final marker, so search backwards.
  const std::size_t q_pos = prompt.rfind(kQuestionMarker);
  if (q_pos == std::string::npos) {
    return prompt;
  }
  const std::string segment = prompt.substr(
      kContextMarker.size(), q_pos - kContextMarker.size());
  if (scope_ == Scope::kContext || segment.empty()) {
    return segment;
  }
  const std::vector<Sentence> sentences = split_sentences(segment);
  return sentences.empty() ? segment : sentences.front().text;
}

std::string FlakyChatBackend::complete(const std::string& model,
                                       const std::string& prompt,
                                       double temperature) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_;
    if (remaining_ > 0) {
      --remaining_;
      throw TransientError("injected transient failure");
    }
  }
  return payload_->complete(model, prompt, temperature);
}

int FlakyChatBackend::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

std::vector<float> HashEmbedBackend::embed_one(const std::string& text) const {
  std::vector<float> vec(dim_, 0.0f);
  for (const std::string& token : tokenize(text)) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ull;
    }
    const std::size_t bucket = static_cast<std::size_t>(h % dim_);
    const float sign = (h >> 63) != 0 ? -1.0f : 1.0f;
    vec[bucket] += sign;
  }
  double norm_sq = 0.0;
  for (float v : vec) norm_sq += static_cast<double>(v) * v;
  if (norm_sq > 0.0) {
    const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
    for (float& v : vec) v *= inv;
  }
  return vec;
}

std::vector<std::vector<float>> HashEmbedBackend::embed(
    const std::string&, const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) out.push_back(embed_one(text));
  return out;
}

ConcurrencyGate::Permit::Permit(ConcurrencyGate& gate) : gate_(gate) {
  std::unique_lock<std::mutex> lock(gate_.mu_);
  gate_.cv_.wait(lock, [this] { return gate_.in_flight_ < gate_.limit_; });
  ++gate_.in_flight_;
}

ConcurrencyGate::Permit::~Permit() {
  {
    std::lock_guard<std::mutex> lock(gate_.mu_);
    --gate_.in_flight_;
  }
  gate_.cv_.notify_one();
}

GenerationClient::GenerationClient(EndpointConfig config,
                                   std::shared_ptr<ChatBackend> chat,
                                   std::shared_ptr<EmbedBackend> embed)
    : config_(std::move(config)),
      chat_(std::move(chat)),
      embed_(std::move(embed)),
      gate_(config_.max_concurrency) {
  config_.validate();
}

template <typename Fn>
auto GenerationClient::with_retries(Fn&& fn) -> decltype(fn()) {
  int attempt = 0;
  for (;;) {
    ++attempt;
    try {
      ConcurrencyGate::Permit permit(gate_);
      return fn();
    } catch (const TransientError& e) {
      if (attempt > config_.max_retries) {
        throw RetriesExhaustedError("gave up after " +
                                    std::to_string(attempt) +
                                    " attempts; last error: " + e.what());
      }
      const int shift = std::min(attempt - 1, 20);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(config_.backoff_ms)
                                    << shift));
    }
  }
}

GenerationResult GenerationClient::generate_answer(const std::string& prompt) {
  if (!chat_) {
    throw std::invalid_argument("no chat backend configured");
  }
  if (prompt.empty()) {
    throw std::invalid_argument("prompt must be non-empty");
  }
  const auto start = std::chrono::steady_clock::now();
  int attempts = 0;
  std::string text = with_retries([&] {
    ++attempts;
    std::string out =
        chat_->complete(config_.model_name, prompt, config_.temperature);
    if (out.empty()) {
      throw EmptyCompletionError("endpoint returned an empty completion");
    }
    return out;
  });
  const auto elapsed = std::chrono::steady_clock::now() - start;
  GenerationResult result;
  result.prompt = prompt;
  result.output_text = std::move(text);
  result.latency_ms =
      std::chrono::duration<double, std::milli>(elapsed).count();
  result.attempts = attempts;
  return result;
}

std::vector<std::vector<float>> GenerationClient::embed_texts(
    const std::vector<std::string>& texts) {
  if (texts.empty()) {
    throw std::invalid_argument("texts must be non-empty");
  }
  if (!embed_) {
    throw std::invalid_argument("no embedding backend configured");
  }
  return with_retries([&] {
    std::vector<std::vector<float>> vecs =
        embed_->embed(config_.model_name, texts);
    if (vecs.size() != texts.size()) {
      throw ProtocolError("endpoint returned " + std::to_string(vecs.size()) +
                          " vectors for " + std::to_string(texts.size()) +
                          " inputs");
    }
    for (const auto& v : vecs) {
      if (v.size() != vecs.front().size()) {
        throw ProtocolError("embedding batch has inconsistent dimensions");
      }
    }
    return vecs;
  });
}

std::vector<QAPair> GenerationClient::generate_qa_pairs(
    const Document& doc, const std::string& prompt_template,
    bool consistency_filter) {
  const std::string prompt = render_qa_template(prompt_template, doc);
  const GenerationResult result = generate_answer(prompt);
  std::vector<QAPair> pairs = parse_qa_output(result.output_text, doc.id);
  if (consistency_filter) {
    std::erase_if(pairs, [&doc](const QAPair& pair) {
      return !answer_consistent(pair.answer, doc);
    });
  }
  return pairs;
}

std::string render_qa_template(const std::string& prompt_template,
                               const Document& doc) {
  static const std::string kPlaceholder = "{document}";
  std::string out = prompt_template;
  std::size_t pos = 0;
  while ((pos = out.find(kPlaceholder, pos)) != std::string::npos) {
    out.replace(pos, kPlaceholder.size(), doc.text);
    pos += doc.text.size();
  }
  return out;
}

std::vector<QAPair> parse_qa_output(const std::string& output,
                                    const std::string& source_doc_id) {
  std::vector<QAPair> pairs;
  std::string pending_question;
  bool have_pending = false;

  std::size_t start = 0;
  while (start <= output.size()) {
    std::size_t end = output.find('\n', start);
    if (end == std::string::npos) end = output.size();
    const std::string_view line(output.data() + start, end - start);

    if (line.rfind("Q: ", 0) == 0) {
      const std::string_view rest = line.substr(3);
      const std::size_t sep = rest.find(" / A: ");
      if (sep != std::string_view::npos) {
        const std::string q = trim(rest.substr(0, sep));
        const std::string a = trim(rest.substr(sep + 6));
        if (!q.empty() && !a.empty()) {
          pairs.push_back(QAPair{q, a, source_doc_id});
        }
        have_pending = false;
      } else {
        pending_question = trim(rest);
        have_pending = !pending_question.empty();
      }
    } else if (line.rfind("A: ", 0) == 0 && have_pending) {
      const std::string a = trim(line.substr(3));
      if (!a.empty()) {
        pairs.push_back(QAPair{pending_question, a, source_doc_id});
      }
      have_pending = false;
    }

    if (end == output.size()) break;
    start = end + 1;
  }
  return pairs;
}

bool answer_consistent(const std::string& answer, const Document& doc) {
  const std::string needle = normalize_whitespace(to_lower(answer));
  if (needle.empty()) return false;
  const std::string haystack = normalize_whitespace(to_lower(doc.text));
  return haystack.find(needle) != std::string::npos;
}

std::string flatten_qa_pairs(const std::vector<QAPair>& pairs) {
  if (pairs.empty()) {
    throw QaFormatError("cannot flatten an empty pair list");
  }
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const QAPair& pair = pairs[i];
    if (pair.question.find('|') != std::string::npos) {
      throw QaFormatError("question " + std::to_string(i + 1) +
                          " contains the separator '|'");
    }
    if (pair.answer.find('|') != std::string::npos) {
      throw QaFormatError("answer " + std::to_string(i + 1) +
                          " contains the separator '|'");
    }
    if (i > 0) out += " | ";
    out += "question: ";
    out += pair.question;
    out += ", answer: ";
    out += pair.answer;
  }
  return out;
}

std::vector<QAPair> parse_flattened(const std::string& text,
                                    const std::string& source_doc_id) {
  static const std::string kEntrySep = " | ";
  static const std::string kQuestionTag = "question: ";
  static const std::string kAnswerTag = ", answer: ";

  if (text.empty()) {
    throw QaFormatError("offset 0: empty input");
  }
  std::vector<QAPair> pairs;
  std::size_t pos = 0;
  std::size_t entry = 0;
  while (pos <= text.size()) {
    ++entry;
    std::size_t end = text.find(kEntrySep, pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view item(text.data() + pos, end - pos);
    const std::string where =
        "entry " + std::to_string(entry) + " (offset " + std::to_string(pos) +
        "): ";

    if (item.rfind(kQuestionTag, 0) != 0) {
      throw QaFormatError(where + "expected \"question: \"");
    }
    const std::string_view rest = item.substr(kQuestionTag.size());
    const std::size_t a_pos = rest.find(kAnswerTag);
    if (a_pos == std::string_view::npos) {
      throw QaFormatError(where + "missing \", answer: \"");
    }
    const std::string_view q = rest.substr(0, a_pos);
    const std::string_view a = rest.substr(a_pos + kAnswerTag.size());
    if (q.empty()) {
      throw QaFormatError(where + "empty question");
    }
    if (a.empty()) {
      throw QaFormatError(where + "empty answer");
    }
    pairs.push_back(QAPair{std::string(q), std::string(a), source_doc_id});

    if (end == text.size()) break;
    pos = end + kEntrySep.size();
  }
  return pairs;
}

std::vector<QAPair> load_qa_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw QaFormatError("cannot open qa-pair file: " + path);
  }
  std::vector<QAPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json obj = json::parse(line);
      QAPair pair{obj.at("question").get<std::string>(),
                  obj.at("answer").get<std::string>(),
                  obj.at("source_doc_id").get<std::string>()};
      if (pair.question.empty() || pair.answer.empty()) {
        throw QaFormatError(path + ":" + std::to_string(lineno) +
                            ": empty question or answer");
      }
      pairs.push_back(std::move(pair));
    } catch (const json::exception& e) {
      throw QaFormatError(path + ":" + std::to_string(lineno) + ": " +
                          e.what());
    }
  }
  return pairs;
}

void save_qa_pairs(const std::vector<QAPair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw QaFormatError("cannot write qa-pair file: " + path);
  }
  for (const QAPair& pair : pairs) {
    const json obj{{"question", pair.question},
                   {"answer", pair.answer},
                   {"source_doc_id", pair.source_doc_id}};
    out << obj.dump() << '\n';
  }
}

}  // namespace raglab
