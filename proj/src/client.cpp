#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <thread>

#include "noisyrag/client/chat.hpp"
#include "noisyrag/error.hpp"

namespace noisyrag::client {

using nlohmann::ordered_json;

std::string to_request_body(const ChatRequest& request) {
  ordered_json body;
  body["model"] = request.model;
  body["messages"] = ordered_json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = request.temperature;
  body["top_p"] = request.top_p;
  body["max_tokens"] = request.max_tokens;
  return body.dump();
}

std::string parse_completion(std::string_view body) {
  const auto json = ordered_json::parse(body, nullptr, false);
  if (json.is_discarded()) fail(ErrorKind::kSchema, "completion response is not valid JSON");
  try {
    return json.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const ordered_json::exception&) {
    fail(ErrorKind::kSchema, "completion response lacks choices[0].message.content");
  }
}

namespace {
std::string env_or(const char* name, std::string value) {
  if (!value.empty()) return value;
  const char* v = std::getenv(name);
  return v != nullptr ? std::string(v) : std::string();
}
}  // namespace

HttpClientConfig HttpClientConfig::from_env(std::string base_url, std::string api_key) {
  HttpClientConfig c;
  c.base_url = env_or("NOISYRAG_BASE_URL", std::move(base_url));
  c.api_key = env_or("NOISYRAG_API_KEY", std::move(api_key));
  return c;
}

void HttpClientConfig::validate() const {
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    fail(ErrorKind::kConfig, "base URL must start with http:// or https://, got '" + base_url + "'");
  }
  if (timeout.count() <= 0) fail(ErrorKind::kConfig, "timeout must be positive");
  if (retry.max_attempts < 1) fail(ErrorKind::kConfig, "retry budget must allow at least one attempt");
  if (retry.initial_backoff.count() < 0 || retry.backoff_multiplier < 1.0) {
    fail(ErrorKind::kConfig, "backoff must be nonnegative and non-shrinking");
  }
  if (max_in_flight < 1) fail(ErrorKind::kConfig, "max_in_flight must be at least 1");
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t scheme_end = config_.base_url.find("://") + 3;
  const std::size_t path_start = config_.base_url.find('/', scheme_end);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? std::string() : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  const std::string body = to_request_body(request);
  const std::string path = path_prefix_ + "/chat/completions";
  auto delay = config_.retry.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    in_flight_->acquire();
    httplib::Result res = [&] {
      httplib::Client cli(scheme_host_port_);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      httplib::Headers headers;
      if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
      return cli.Post(path, headers, body, "application/json");
    }();
    in_flight_->release();

    bool retryable = true;
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      return parse_completion(res->body);
    } else {
      last_error = "endpoint returned HTTP " + std::to_string(res->status);
      retryable = res->status == 429 || res->status >= 500;
      if (res->has_header("Retry-After")) {
        const std::string after = res->get_header_value("Retry-After");
        char* end = nullptr;
        const long seconds = std::strtol(after.c_str(), &end, 10);
        if (end != after.c_str() && seconds >= 0) delay = std::chrono::milliseconds(seconds * 1000);
      }
    }
    if (!retryable) break;
    if (attempt < config_.retry.max_attempts) {
      spdlog::warn("chat completion attempt {} failed ({}), retrying", attempt, last_error);
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * config_.retry.backoff_multiplier));
    }
  }
  fail(ErrorKind::kTransport, last_error);
}

}  // namespace noisyrag::client
