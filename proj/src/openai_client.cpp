#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "msrag/llm.hpp"

namespace msrag {

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

OpenAiClient::OpenAiClient(OpenAiConfig config) : config_(std::move(config)) {
  const auto& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("LLM endpoint must include a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  std::string base = path_start == std::string::npos ? std::string{} : url.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  path_ = base + "/chat/completions";
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

LlmReply OpenAiClient::complete(const LlmRequest& request) {
  nlohmann::json body;
  body["model"] = config_.model;
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output;
  body["stream"] = false;
  body["messages"] = nlohmann::json::array();
  if (!request.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  body["messages"].push_back({{"role", "user"}, {"content", request.user}});
  const auto payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  int last_status = 0;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + path_;
      last_status = res->status;
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw LlmError(LlmError::Kind::http_client, "HTTP " + std::to_string(res->status) + ": " + res->body,
                     res->status);
    }

    auto json = nlohmann::json::parse(res->body, nullptr, false);
    if (json.is_discarded() || !json.contains("choices") || !json["choices"].is_array() || json["choices"].empty()) {
      throw LlmError(LlmError::Kind::bad_response, "chat completion response has no choices", res->status);
    }
    const auto& message = json["choices"][0].value("message", nlohmann::json::object());
    if (!message.contains("content") || !message["content"].is_string()) {
      throw LlmError(LlmError::Kind::bad_response, "chat completion choice has no text content", res->status);
    }

    LlmReply reply;
    reply.text = message["content"].get<std::string>();
    const auto usage = json.value("usage", nlohmann::json::object());
    if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_unsigned()) {
      reply.usage.prompt_tokens = usage["prompt_tokens"].get<std::size_t>();
    } else {
      reply.usage.prompt_tokens = count_tokens(request.system) + count_tokens(request.user);
    }
    if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_unsigned()) {
      reply.usage.completion_tokens = usage["completion_tokens"].get<std::size_t>();
    } else {
      reply.usage.completion_tokens = count_tokens(reply.text);
    }
    return reply;
  }
  throw LlmError(last_status ? LlmError::Kind::http_server : LlmError::Kind::transport,
                 last_error + " after " + std::to_string(config_.max_attempts) + " attempts", last_status);
}

}  // namespace msrag
