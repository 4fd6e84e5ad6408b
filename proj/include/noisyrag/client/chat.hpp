#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace noisyrag::client {

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

/// Chat-completions request with greedy decoding.
struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 256;
};

std::string to_request_body(const ChatRequest& request);

/// choices[0].message.content of a chat-completions response; kSchema when
/// the body does not have that shape.
std::string parse_completion(std::string_view body);

/// Anything that turns a chat request into text. Implementations throw
/// Error(kTransport) when no answer could be obtained.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
};

struct HttpClientConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  int max_in_flight = 4;

  /// base_url from NOISYRAG_BASE_URL and api_key from NOISYRAG_API_KEY;
  /// non-empty arguments win over the environment.
  static HttpClientConfig from_env(std::string base_url = {}, std::string api_key = {});
  void validate() const;
};

/// POSTs to <base_url>/chat/completions with a bearer token. Connection
/// failures, 429 and 5xx are retried with exponential backoff (a Retry-After
/// header in seconds overrides the delay); other statuses fail at once.
class HttpChatClient final : public GenerationClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  HttpClientConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace noisyrag::client
