#include <chrono>
#include <thread>

#include "httplib.h"

#include "clost/agents.hpp"
#include "clost/error.hpp"

namespace clost::agents {
namespace {

bool retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status < 600);
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("backend url must include a scheme: " + config_.url);
  }
  const auto path_start = config_.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = config_.url;
    path_ = "/";
  } else {
    base_ = config_.url.substr(0, path_start);
    path_ = config_.url.substr(path_start);
  }
}

std::string HttpBackend::label() const {
  return "http:" + config_.model;
}

std::string HttpBackend::complete(const std::vector<Message>& messages,
                                  const CompletionParams& params) {
  nlohmann::json body = {{"model", config_.model},
                         {"messages", nlohmann::json::array()},
                         {"temperature", params.temperature},
                         {"max_tokens", params.max_tokens}};
  for (const auto& m : messages) {
    body["messages"].push_back(
        {{"role", to_string(m.role)}, {"content", m.content}});
  }
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = std::chrono::milliseconds(
          static_cast<long long>(config_.base_delay_ms) << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    // one client per request keeps the backend shareable across threads
    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    requests_.fetch_add(1);
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "network error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") ||
          !reply["choices"].is_array() || reply["choices"].empty() ||
          !reply["choices"][0].contains("message") ||
          !reply["choices"][0]["message"].contains("content") ||
          !reply["choices"][0]["message"]["content"].is_string()) {
        throw BackendError("malformed chat-completion response from " + base_);
      }
      return reply["choices"][0]["message"]["content"].get<std::string>();
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable_status(res->status)) {
      throw BackendError("chat-completion request failed (" + last_error +
                         "): " + res->body);
    }
  }
  throw BackendError("chat-completion request failed after " +
                     std::to_string(config_.max_retries + 1) + " attempts (" +
                     last_error + ")");
}

}  // namespace clost::agents
