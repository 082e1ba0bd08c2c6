#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "oracles.hpp"
#include "raglab/generation.hpp"

using namespace raglab;
using nlohmann::json;

namespace {

EndpointConfig fast_config() {
  EndpointConfig config;
  config.model_name = "test-model";
  config.max_retries = 2;
  config.backoff_ms = 1;
  return config;
}

Document make_doc(const std::string& id, const std::string& text) {
  return Document{id, "", text, std::nullopt, false};
}

/// Counts completions that reach the payload.
class CountingChatBackend : public ChatBackend {
 public:
  explicit CountingChatBackend(std::shared_ptr<ChatBackend> payload)
      : payload_(std::move(payload)) {}
  std::string complete(const std::string& model, const std::string& prompt,
                       double temperature) override {
    ++calls_;
    return payload_->complete(model, prompt, temperature);
  }
  int calls() const { return calls_.load(); }

 private:
  std::atomic<int> calls_{0};
  std::shared_ptr<ChatBackend> payload_;
};

/// Tracks how many completions run at once.
class GaugeChatBackend : public ChatBackend {
 public:
  std::string complete(const std::string&, const std::string& prompt,
                       double) override {
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight_;
    return prompt;
  }
  int peak() const { return peak_.load(); }

 private:
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  ~TestServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST_CASE("endpoint config validation") {
  EndpointConfig config;
  CHECK_NOTHROW(config.validate());
  config.max_retries = -1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = EndpointConfig{};
  config.max_concurrency = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = EndpointConfig{};
  config.temperature = -0.1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = EndpointConfig{};
  config.timeout_ms = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = EndpointConfig{};
  config.backoff_ms = -1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("echo and fixed mocks") {
  EchoChatBackend echo;
  CHECK(echo.complete("m", "hello", 0.0) == "hello");
  FixedChatBackend fixed("always this");
  CHECK(fixed.complete("m", "anything", 0.0) == "always this");
}

TEST_CASE("extractive mock lifts the context segment") {
  ExtractiveChatBackend whole(ExtractiveChatBackend::Scope::kContext);
  CHECK(whole.complete("m", "Context: A. B.\nC. Question: Who?", 0.0) ==
        "A. B.\nC.");
  ExtractiveChatBackend first(ExtractiveChatBackend::Scope::kFirstSentence);
  CHECK(first.complete("m", "Context: A sentence. Banother. Question: Who?",
                       0.0) == "A sentence.");
  // The question marker is found from the right, so documents containing the
  // marker text never truncate the context.
  CHECK(whole.complete("m", "Context: A doc saying Question: inside. Question: Who?",
                       0.0) == "A doc saying Question: inside.");
  // Prompts without the markers pass through unchanged.
  CHECK(whole.complete("m", "Question: plain", 0.0) == "Question: plain");
  CHECK(first.complete("m", "no markers at all", 0.0) == "no markers at all");
}

TEST_CASE("flaky mock fails then recovers; the client retries") {
  auto flaky =
      std::make_shared<FlakyChatBackend>(2, std::make_shared<EchoChatBackend>());
  GenerationClient client(fast_config(), flaky);
  const GenerationResult result = client.generate_answer("ping");
  CHECK(result.output_text == "ping");
  CHECK(result.attempts == 3);
  CHECK(flaky->calls() == 3);
  CHECK(result.prompt == "ping");
  CHECK(result.latency_ms >= 0.0);
}

TEST_CASE("retries stop after max_retries + 1 attempts") {
  auto flaky =
      std::make_shared<FlakyChatBackend>(99, std::make_shared<EchoChatBackend>());
  GenerationClient client(fast_config(), flaky);
  CHECK_THROWS_AS((void)client.generate_answer("ping"), RetriesExhaustedError);
  CHECK(flaky->calls() == 3);  // max_retries=2 -> 3 attempts
}

TEST_CASE("zero retries means one attempt") {
  auto flaky =
      std::make_shared<FlakyChatBackend>(1, std::make_shared<EchoChatBackend>());
  EndpointConfig config = fast_config();
  config.max_retries = 0;
  GenerationClient client(config, flaky);
  CHECK_THROWS_AS((void)client.generate_answer("ping"), RetriesExhaustedError);
  CHECK(flaky->calls() == 1);
}

TEST_CASE("empty completions are not retried") {
  auto counting = std::make_shared<CountingChatBackend>(
      std::make_shared<FixedChatBackend>(""));
  GenerationClient client(fast_config(), counting);
  CHECK_THROWS_AS((void)client.generate_answer("ping"), EmptyCompletionError);
  CHECK(counting->calls() == 1);
}

TEST_CASE("generate_answer argument checks") {
  GenerationClient client(fast_config(), std::make_shared<EchoChatBackend>());
  CHECK_THROWS_AS((void)client.generate_answer(""), std::invalid_argument);
  GenerationClient no_chat(fast_config(), nullptr,
                           std::make_shared<HashEmbedBackend>(8));
  CHECK_THROWS_AS((void)no_chat.generate_answer("x"), std::invalid_argument);
}

TEST_CASE("concurrency stays within the configured bound") {
  auto gauge = std::make_shared<GaugeChatBackend>();
  EndpointConfig config = fast_config();
  config.max_concurrency = 2;
  GenerationClient client(config, gauge);

  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&client] { (void)client.generate_answer("x"); });
  }
  for (auto& t : threads) t.join();
  CHECK(gauge->peak() <= 2);
  CHECK(gauge->peak() >= 1);
}

TEST_CASE("hash embeddings are deterministic unit vectors") {
  HashEmbedBackend backend(32);
  const auto a = backend.embed_one("the quick brown fox");
  const auto b = backend.embed_one("the quick brown fox");
  CHECK(a == b);
  REQUIRE(a.size() == 32);
  double norm = 0.0;
  for (float v : a) norm += static_cast<double>(v) * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));

  const auto different = backend.embed_one("completely other words");
  CHECK(a != different);

  // No tokens: the zero vector is left unnormalized.
  const auto zero = backend.embed_one("...");
  for (float v : zero) CHECK(v == 0.0f);

  const auto batch = backend.embed("m", {"one", "two"});
  REQUIRE(batch.size() == 2);
  CHECK(batch[0] == backend.embed_one("one"));
  CHECK(batch[1] == backend.embed_one("two"));
}

TEST_CASE("embed_texts validates inputs and batch shape") {
  GenerationClient client(fast_config(), nullptr,
                          std::make_shared<HashEmbedBackend>(16));
  const auto vecs = client.embed_texts({"alpha", "beta", "gamma"});
  REQUIRE(vecs.size() == 3);
  for (const auto& v : vecs) CHECK(v.size() == 16);

  CHECK_THROWS_AS((void)client.embed_texts({}), std::invalid_argument);

  GenerationClient no_embed(fast_config(), std::make_shared<EchoChatBackend>());
  CHECK_THROWS_AS((void)no_embed.embed_texts({"x"}), std::invalid_argument);

  class ShortBackend : public EmbedBackend {
   public:
    std::vector<std::vector<float>> embed(
        const std::string&, const std::vector<std::string>&) override {
      return {{1.0f}};
    }
  };
  GenerationClient bad(fast_config(), nullptr, std::make_shared<ShortBackend>());
  CHECK_THROWS_AS((void)bad.embed_texts({"a", "b"}), ProtocolError);

  class MixedBackend : public EmbedBackend {
   public:
    std::vector<std::vector<float>> embed(
        const std::string&, const std::vector<std::string>&) override {
      return {{1.0f, 2.0f}, {1.0f}};
    }
  };
  GenerationClient mixed(fast_config(), nullptr, std::make_shared<MixedBackend>());
  CHECK_THROWS_AS((void)mixed.embed_texts({"a", "b"}), ProtocolError);
}

TEST_CASE("qa template rendering") {
  const Document doc = make_doc("d1", "Fact one. Fact two.");
  const std::string rendered = render_qa_template(kQaGenerationTemplate, doc);
  CHECK(rendered.find("{document}") == std::string::npos);
  CHECK(rendered.find("Fact one. Fact two.") != std::string::npos);
  CHECK(render_qa_template("x {document} y {document}", doc) ==
        "x Fact one. Fact two. y Fact one. Fact two.");
}

TEST_CASE("parse_qa_output accepts both documented forms") {
  const std::string output =
      "Some reasoning first.\n"
      "Q: Who wrote it? / A: Ada\n"
      "Q: When?\n"
      "A: 1843\n"
      "Noise line\n"
      "Q: trailing spaces / A:  padded  \r\n"
      "Q: orphan question with no answer\n"
      "A: orphan answer without question\n";
  // The final "A:" line follows a pending "Q:" line, so it binds to it.
  const auto pairs = parse_qa_output(output, "doc9");
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0] == QAPair{"Who wrote it?", "Ada", "doc9"});
  CHECK(pairs[1] == QAPair{"When?", "1843", "doc9"});
  CHECK(pairs[2] == QAPair{"trailing spaces", "padded", "doc9"});
  CHECK(pairs[3] == QAPair{"orphan question with no answer",
                           "orphan answer without question", "doc9"});
  CHECK(parse_qa_output("no pairs here", "d").empty());
  CHECK(parse_qa_output("", "d").empty());
  // Empty fields are skipped.
  CHECK(parse_qa_output("Q:  / A: x\n", "d").empty());
  CHECK(parse_qa_output("Q: x / A: \n", "d").empty());
}

TEST_CASE("answer_consistent normalizes both sides") {
  const Document doc = make_doc("d", "The  Nile is LONG. Quite long.");
  CHECK(answer_consistent("the nile", doc));
  CHECK(answer_consistent("NILE IS long", doc));
  CHECK(answer_consistent("is long. quite", doc));
  CHECK_FALSE(answer_consistent("the amazon", doc));
  CHECK_FALSE(answer_consistent("", doc));
  CHECK_FALSE(answer_consistent("   ", doc));
}

TEST_CASE("generate_qa_pairs applies the consistency filter") {
  const Document doc = make_doc("d1", "Paris is the capital of France.");
  const std::string scripted =
      "Q: What is the capital of France? / A: Paris\n"
      "Q: Which country? / A: France\n"
      "Q: Fabricated? / A: Berlin\n";
  auto backend = std::make_shared<FixedChatBackend>(scripted);
  GenerationClient client(fast_config(), backend);

  const auto filtered = client.generate_qa_pairs(doc, kQaGenerationTemplate);
  REQUIRE(filtered.size() == 2);
  CHECK(filtered[0].answer == "Paris");
  CHECK(filtered[1].answer == "France");
  CHECK(filtered[0].source_doc_id == "d1");

  const auto unfiltered =
      client.generate_qa_pairs(doc, kQaGenerationTemplate, false);
  CHECK(unfiltered.size() == 3);
}

TEST_CASE("flatten and parse round trip") {
  const std::vector<QAPair> pairs = {
      {"Who wrote it?", "Ada", "d1"},
      {"When was it written?", "1843", "d1"},
  };
  const std::string flat = flatten_qa_pairs(pairs);
  CHECK(flat ==
        "question: Who wrote it?, answer: Ada | "
        "question: When was it written?, answer: 1843");
  const auto parsed = parse_flattened(flat, "d1");
  CHECK(parsed == pairs);

  // A single pair has no separator.
  CHECK(flatten_qa_pairs({{"q", "a", "d"}}) == "question: q, answer: a");
}

TEST_CASE("parse splits on the first answer tag") {
  const auto pairs =
      parse_flattened("question: why, answer: because, answer: twice");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].question == "why");
  CHECK(pairs[0].answer == "because, answer: twice");
}

TEST_CASE("flatten rejects the separator character") {
  CHECK_THROWS_AS((void)flatten_qa_pairs({{"a|b", "c", "d"}}), QaFormatError);
  CHECK_THROWS_AS((void)flatten_qa_pairs({{"a", "c|d", "d"}}), QaFormatError);
  CHECK_THROWS_AS((void)flatten_qa_pairs({}), QaFormatError);
}

TEST_CASE("parse errors carry entry numbers and offsets") {
  try {
    (void)parse_flattened("question: q, answer: a | bad entry");
    FAIL("expected QaFormatError");
  } catch (const QaFormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("entry 2") != std::string::npos);
    CHECK(msg.find("offset 25") != std::string::npos);
  }
  CHECK_THROWS_AS((void)parse_flattened(""), QaFormatError);
  CHECK_THROWS_AS((void)parse_flattened("question: q"), QaFormatError);
  CHECK_THROWS_AS((void)parse_flattened("question: , answer: a"), QaFormatError);
  CHECK_THROWS_AS((void)parse_flattened("question: q, answer: "), QaFormatError);
  CHECK_THROWS_AS((void)parse_flattened("answer: a, question: q"), QaFormatError);
}

TEST_CASE("qa pairs JSON Lines round trip") {
  const std::string dir = oracles::fresh_dir("qa-rt");
  const std::string path = dir + "/pairs.jsonl";
  const std::vector<QAPair> pairs = {{"q1", "a1", "d1"}, {"q2", "a2", "d2"}};
  save_qa_pairs(pairs, path);
  CHECK(load_qa_pairs(path) == pairs);
  CHECK_THROWS_AS((void)load_qa_pairs(dir + "/none.jsonl"), QaFormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("http chat backend end to end") {
  TestServer ts;
  std::atomic<int> hits{0};
  std::string seen_auth;
  json seen_body;
  ts.server.Post("/v1/chat/completions",
                 [&](const httplib::Request& req, httplib::Response& res) {
                   ++hits;
                   seen_auth = req.get_header_value("Authorization");
                   seen_body = json::parse(req.body);
                   const json reply{
                       {"choices",
                        json::array({json{{"message",
                                           json{{"role", "assistant"},
                                                {"content", "pong"}}}}})}};
                   res.set_content(reply.dump(), "application/json");
                 });
  ts.start();

  setenv("RAGLAB_TEST_KEY", "sekrit", 1);
  EndpointConfig config = fast_config();
  config.base_url = ts.url();
  config.api_key_env = "RAGLAB_TEST_KEY";
  config.temperature = 0.25;
  GenerationClient client(config,
                          std::make_shared<HttpChatBackend>(
                              config.base_url, config.api_key_env,
                              config.timeout_ms));
  const GenerationResult result = client.generate_answer("ping");
  CHECK(result.output_text == "pong");
  CHECK(hits.load() == 1);
  CHECK(seen_auth == "Bearer sekrit");
  CHECK(seen_body.at("model") == "test-model");
  CHECK(seen_body.at("temperature").get<double>() == 0.25);
  REQUIRE(seen_body.at("messages").size() == 1);
  CHECK(seen_body["messages"][0].at("role") == "user");
  CHECK(seen_body["messages"][0].at("content") == "ping");
  unsetenv("RAGLAB_TEST_KEY");
}

TEST_CASE("http chat backend sends no auth header without a key env") {
  TestServer ts;
  bool had_auth = true;
  ts.server.Post("/v1/chat/completions",
                 [&](const httplib::Request& req, httplib::Response& res) {
                   had_auth = req.has_header("Authorization");
                   res.set_content(
                       R"({"choices":[{"message":{"content":"ok"}}]})",
                       "application/json");
                 });
  ts.start();
  HttpChatBackend backend(ts.url(), "", 5000);
  CHECK(backend.complete("m", "p", 0.0) == "ok");
  CHECK_FALSE(had_auth);
}

TEST_CASE("http chat backend error taxonomy") {
  TestServer ts;
  std::atomic<int> mode{0};
  std::atomic<int> hits{0};
  ts.server.Post("/v1/chat/completions",
                 [&](const httplib::Request&, httplib::Response& res) {
                   ++hits;
                   switch (mode.load()) {
                     case 0:
                       res.status = 429;
                       break;
                     case 1:
                       res.status = 503;
                       break;
                     case 2:
                       res.status = 400;
                       res.set_content("bad request", "text/plain");
                       break;
                     case 3:
                       res.set_content("not json at all", "application/json");
                       break;
                     case 4:
                       res.set_content(R"({"unexpected":"shape"})",
                                       "application/json");
                       break;
                   }
                 });
  ts.start();
  HttpChatBackend backend(ts.url(), "", 5000);

  mode = 0;
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), TransientError);
  mode = 1;
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), TransientError);
  mode = 2;
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), ProtocolError);
  mode = 3;
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), ProtocolError);
  mode = 4;
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), ProtocolError);
}

TEST_CASE("client retries transient http failures") {
  TestServer ts;
  std::atomic<int> hits{0};
  ts.server.Post("/v1/chat/completions",
                 [&](const httplib::Request&, httplib::Response& res) {
                   const int n = ++hits;
                   if (n <= 2) {
                     res.status = 500;
                     return;
                   }
                   res.set_content(
                       R"({"choices":[{"message":{"content":"third time"}}]})",
                       "application/json");
                 });
  ts.start();

  EndpointConfig config = fast_config();
  config.base_url = ts.url();
  GenerationClient client(config,
                          std::make_shared<HttpChatBackend>(ts.url(), "", 5000));
  const GenerationResult result = client.generate_answer("p");
  CHECK(result.output_text == "third time");
  CHECK(result.attempts == 3);
  CHECK(hits.load() == 3);
}

TEST_CASE("unreachable endpoint raises TransientError") {
  // A port with no listener; connection is refused immediately.
  HttpChatBackend backend("http://127.0.0.1:9", "", 300);
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), TransientError);
}

TEST_CASE("unset credential env raises ProtocolError") {
  unsetenv("RAGLAB_MISSING_KEY");
  HttpChatBackend backend("http://127.0.0.1:9", "RAGLAB_MISSING_KEY", 300);
  CHECK_THROWS_AS((void)backend.complete("m", "p", 0.0), ProtocolError);
}

TEST_CASE("http embedding backend end to end") {
  TestServer ts;
  json seen_body;
  ts.server.Post("/v1/embeddings",
                 [&](const httplib::Request& req, httplib::Response& res) {
                   seen_body = json::parse(req.body);
                   json data = json::array();
                   for (std::size_t i = 0; i < seen_body.at("input").size(); ++i) {
                     data.push_back(json{
                         {"embedding",
                          json::array({0.5 * static_cast<double>(i + 1), 0.25})}});
                   }
                   res.set_content(json{{"data", data}}.dump(),
                                   "application/json");
                 });
  ts.start();

  HttpEmbedBackend backend(ts.url(), "", 5000);
  const auto vecs = backend.embed("embed-model", {"a", "b"});
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[0] == std::vector<float>{0.5f, 0.25f});
  CHECK(vecs[1] == std::vector<float>{1.0f, 0.25f});
  CHECK(seen_body.at("model") == "embed-model");
  CHECK(seen_body.at("input") == json::array({"a", "b"}));

  TestServer bad;
  bad.server.Post("/v1/embeddings",
                  [](const httplib::Request&, httplib::Response& res) {
                    res.set_content(R"({"nope":1})", "application/json");
                  });
  bad.start();
  HttpEmbedBackend broken(bad.url(), "", 5000);
  CHECK_THROWS_AS((void)broken.embed("m", {"a"}), ProtocolError);
}
