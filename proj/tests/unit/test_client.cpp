#include <gtest/gtest.h>

#include <atomic>
#include <thread>

// Project headers pull in Eigen, which must come before httplib's macros.
#include "noisyrag/client/chat.hpp"
#include "noisyrag/correction/external.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/pipelines/components.hpp"
#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace noisyrag;
using namespace noisyrag::client;
using Json = nlohmann::json;

namespace {

std::string completion_body(const std::string& content) {
  return Json{{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

/// Local chat-completions endpoint. The handler sees every request body.
class FakeEndpoint {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, int call)>;

  explicit FakeEndpoint(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int call = calls_++;
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(req.body);
        auth_ = req.get_header_value("Authorization");
      }
      handler_(req, res, call);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int calls() const { return calls_; }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::string auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::mutex mu_;
  std::vector<std::string> bodies_;
  std::string auth_;
};

HttpClientConfig fast_config(const std::string& url) {
  HttpClientConfig c;
  c.base_url = url;
  c.api_key = "secret";
  c.timeout = std::chrono::milliseconds(2000);
  c.retry.initial_backoff = std::chrono::milliseconds(1);
  return c;
}

class FixedClient final : public GenerationClient {
 public:
  explicit FixedClient(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const ChatRequest& request) override {
    last = request;
    return reply_;
  }
  ChatRequest last;

 private:
  std::string reply_;
};

class FailingClient final : public GenerationClient {
 public:
  std::string complete(const ChatRequest&) override { fail(ErrorKind::kTransport, "endpoint down"); }
};

correction::CorrectionContext external_context() {
  correction::CorrectionContext ctx;
  ctx.query = "capitsl of frence";
  ctx.retrieved_docs = {{"d1", "Paris is the capital of France."}, {"d2", "France borders Spain."}, {"d3", "Lyon is a city."}};
  ctx.base_lexicon = &noisyrag::testing::lexicon();
  ctx.keyboard = &noisyrag::testing::tables().keyboard;
  ctx.visual = &noisyrag::testing::tables().visual;
  return ctx;
}

const std::string kCorrectionTemplate = "Docs:\n{documents}\nQuery: {query}\nCorrected query:";

}  // namespace

TEST(ChatRequest, BodyCarriesDeterministicDecoding) {
  ChatRequest r;
  r.model = "m";
  r.messages = {{"user", "hello"}};
  const auto j = Json::parse(to_request_body(r));
  EXPECT_EQ(j["model"], "m");
  EXPECT_EQ(j["temperature"], 0.0);
  EXPECT_EQ(j["top_p"], 1.0);
  EXPECT_EQ(j["messages"][0]["role"], "user");
  EXPECT_EQ(j["messages"][0]["content"], "hello");
}

TEST(ChatRequest, ParseCompletion) {
  EXPECT_EQ(parse_completion(completion_body("Paris")), "Paris");
  EXPECT_THROW(parse_completion("{}"), Error);
  EXPECT_THROW(parse_completion("not json"), Error);
}

TEST(HttpChatClient, SendsRequestAndParsesReply) {
  FakeEndpoint server([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content(completion_body("Paris"), "application/json");
  });
  HttpChatClient client(fast_config(server.base_url()));
  ChatRequest r;
  r.model = "m";
  r.messages = {{"user", "capital?"}};
  EXPECT_EQ(client.complete(r), "Paris");
  EXPECT_EQ(server.auth(), "Bearer secret");
  EXPECT_EQ(Json::parse(server.bodies().at(0))["messages"][0]["content"], "capital?");
}

TEST(HttpChatClient, RetriesServerErrorsAndRateLimits) {
  FakeEndpoint server([](const httplib::Request&, httplib::Response& res, int call) {
    if (call == 0) {
      res.status = 503;
    } else if (call == 1) {
      res.status = 429;
      res.set_header("Retry-After", "0");
    } else {
      res.set_content(completion_body("ok"), "application/json");
    }
  });
  HttpChatClient client(fast_config(server.base_url()));
  EXPECT_EQ(client.complete({"m", {{"user", "x"}}}), "ok");
  EXPECT_EQ(server.calls(), 3);
}

TEST(HttpChatClient, GivesUpAfterMaxAttempts) {
  FakeEndpoint server([](const httplib::Request&, httplib::Response& res, int) { res.status = 500; });
  HttpChatClient client(fast_config(server.base_url()));
  try {
    client.complete({"m", {{"user", "x"}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
  }
  EXPECT_EQ(server.calls(), 3);
}

TEST(HttpChatClient, ClientErrorsAreNotRetried) {
  FakeEndpoint server([](const httplib::Request&, httplib::Response& res, int) { res.status = 400; });
  HttpChatClient client(fast_config(server.base_url()));
  EXPECT_THROW(client.complete({"m", {{"user", "x"}}}), Error);
  EXPECT_EQ(server.calls(), 1);
}

TEST(HttpChatClient, UnreachableEndpoint) {
  auto config = fast_config("http://127.0.0.1:1/v1");
  config.retry.max_attempts = 2;
  HttpChatClient client(config);
  try {
    client.complete({"m", {{"user", "x"}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTransport);
  }
}

TEST(HttpClientConfig, Validation) {
  HttpClientConfig c;
  c.base_url = "ftp://host";
  EXPECT_THROW(c.validate(), Error);
  c.base_url = "http://host/v1";
  c.retry.max_attempts = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ExternalCorrection, PromptContainsQueryAndAllDocuments) {
  const auto ctx = external_context();
  const std::string prompt = correction::render_correction_prompt(kCorrectionTemplate, ctx.query, ctx.retrieved_docs);
  EXPECT_EQ(prompt,
            "Docs:\n[1] Paris is the capital of France.\n\n[2] France borders Spain.\n\n[3] Lyon is a city.\n"
            "Query: capitsl of frence\nCorrected query:");
}

TEST(ExternalCorrection, StubReplyIsUsed) {
  FixedClient client("capital of france");
  const auto result = correction::correct_query_external(external_context(), client, kCorrectionTemplate);
  EXPECT_EQ(result.corrected_query, "capital of france");
  ASSERT_EQ(result.changed.size(), 2u);
  EXPECT_EQ(result.changed[0].corrected, "capital");
  EXPECT_EQ(result.changed[1].corrected, "france");
  EXPECT_NE(client.last.messages.at(0).content.find("capitsl of frence"), std::string::npos);
}

TEST(ExternalCorrection, LabelsAndQuotesAreStripped) {
  EXPECT_EQ(correction::parse_corrected_query("Corrected query: \"capital of france\"", "capitsl of frence"),
            "capital of france");
  EXPECT_FALSE(correction::parse_corrected_query("", "a b").has_value());
  EXPECT_FALSE(correction::parse_corrected_query("one\ntwo", "a b").has_value());
  EXPECT_FALSE(correction::parse_corrected_query("too many words here", "a b").has_value());
}

TEST(ExternalCorrection, MalformedReplyFailsOpen) {
  FixedClient client("Sure! Here is the corrected query:\ncapital of france\nHope this helps.");
  const auto result = correction::correct_query_external(external_context(), client, kCorrectionTemplate);
  EXPECT_EQ(result.corrected_query, "capitsl of frence");
  EXPECT_TRUE(result.changed.empty());
}

TEST(ExternalCorrection, TransportFailureFailsOpen) {
  FailingClient client;
  const auto result = correction::correct_query_external(external_context(), client, kCorrectionTemplate);
  EXPECT_EQ(result.corrected_query, "capitsl of frence");
}

TEST(ChatGenerator, RequestContainsQueryAndEveryDocument) {
  FakeEndpoint server([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content(completion_body(" Paris \n"), "application/json");
  });
  HttpChatClient client(fast_config(server.base_url()));
  pipelines::ChatGenerator generator(client, "m");
  const std::vector<retrieval::Document> docs = {{"a", "Doc one about Paris."}, {"b", "Doc two."}, {"c", "Doc three."}};
  const std::string prompt = pipelines::render_generation_prompt("{documents}\nQ: {question}", "capital of france", docs);
  const std::string answer = generator.generate("q1", "capital of france", docs, prompt);
  EXPECT_EQ(answer, "Paris");
  const auto body = Json::parse(server.bodies().at(0));
  const std::string content = body["messages"][0]["content"];
  EXPECT_NE(content.find("capital of france"), std::string::npos);
  for (const auto& d : docs) EXPECT_NE(content.find(d.contents), std::string::npos);
  EXPECT_EQ(body["temperature"], 0.0);
}
