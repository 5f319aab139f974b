#include "msrag/llm.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msrag/text.hpp"

namespace msrag {

std::size_t count_tokens(std::string_view text) { return text::split_whitespace(text).size(); }

ScriptedLlm& ScriptedLlm::on(std::string pattern, std::string reply) {
  std::lock_guard lock(mutex_);
  rules_.push_back({std::move(pattern), std::move(reply), std::nullopt});
  return *this;
}

ScriptedLlm& ScriptedLlm::fail_on(std::string pattern, std::string message) {
  std::lock_guard lock(mutex_);
  rules_.push_back({std::move(pattern), {}, std::move(message)});
  return *this;
}

ScriptedLlm& ScriptedLlm::enqueue(std::string pattern, std::string reply) {
  std::lock_guard lock(mutex_);
  queue_.push_back({std::move(pattern), std::move(reply), std::nullopt});
  return *this;
}

ScriptedLlm& ScriptedLlm::enqueue_failure(std::string pattern, std::string message) {
  std::lock_guard lock(mutex_);
  queue_.push_back({std::move(pattern), {}, std::move(message)});
  return *this;
}

std::unique_ptr<ScriptedLlm> ScriptedLlm::from_json(std::string_view script) {
  auto root = nlohmann::json::parse(script);
  auto stub = std::make_unique<ScriptedLlm>();
  auto load = [](const nlohmann::json& item, auto add_reply, auto add_error) {
    auto pattern = item.at("pattern").get<std::string>();
    if (item.contains("error")) {
      add_error(std::move(pattern), item.at("error").get<std::string>());
    } else {
      add_reply(std::move(pattern), item.at("reply").get<std::string>());
    }
  };
  for (const auto& r : root.value("rules", nlohmann::json::array())) {
    load(
        r, [&](std::string p, std::string v) { stub->on(std::move(p), std::move(v)); },
        [&](std::string p, std::string m) { stub->fail_on(std::move(p), std::move(m)); });
  }
  for (const auto& r : root.value("queue", nlohmann::json::array())) {
    load(
        r, [&](std::string p, std::string v) { stub->enqueue(std::move(p), std::move(v)); },
        [&](std::string p, std::string m) { stub->enqueue_failure(std::move(p), std::move(m)); });
  }
  return stub;
}

std::unique_ptr<ScriptedLlm> ScriptedLlm::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open stub script " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

LlmReply ScriptedLlm::complete(const LlmRequest& request) {
  const std::string haystack = request.system.empty() ? request.user : request.system + "\n" + request.user;

  std::optional<Rule> matched;
  {
    std::lock_guard lock(mutex_);
    calls_.push_back(request);
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
      if (haystack.find(it->pattern) != std::string::npos) {
        matched = std::move(*it);
        queue_.erase(it);
        break;
      }
    }
    if (!matched) {
      for (const auto& rule : rules_) {
        if (haystack.find(rule.pattern) != std::string::npos) {
          matched = rule;
          break;
        }
      }
    }
  }
  if (!matched) {
    throw LlmError(LlmError::Kind::unscripted,
                   "unscripted prompt: " + std::string(text::trim(haystack.substr(0, 120))));
  }
  if (matched->error) throw LlmError(LlmError::Kind::injected, *matched->error);

  LlmReply reply;
  reply.text = matched->reply;
  reply.usage.prompt_tokens = count_tokens(request.system) + count_tokens(request.user);
  reply.usage.completion_tokens = count_tokens(reply.text);
  return reply;
}

std::vector<LlmRequest> ScriptedLlm::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ScriptedLlm::call_count(std::string_view pattern) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& c : calls_) {
    if (c.system.find(pattern) != std::string::npos || c.user.find(pattern) != std::string::npos) ++n;
  }
  return n;
}

LlmReply MeteredLlm::complete(const LlmRequest& request) {
  auto reply = inner_.complete(request);
  std::lock_guard lock(mutex_);
  usage_ += reply.usage;
  ++calls_;
  return reply;
}

LlmUsage MeteredLlm::usage() const {
  std::lock_guard lock(mutex_);
  return usage_;
}

std::size_t MeteredLlm::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

}  // namespace msrag
