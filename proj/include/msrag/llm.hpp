#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msrag {

struct LlmRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_output = 512;
};

struct LlmUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;

  LlmUsage& operator+=(const LlmUsage& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    return *this;
  }
};

struct LlmReply {
  std::string text;
  LlmUsage usage;
};

class LlmError : public std::runtime_error {
 public:
  enum class Kind {
    transport,     // connection failed or timed out
    http_client,   // 4xx other than 429; never retried
    http_server,   // 5xx or 429 after retries
    bad_response,  // body did not match the wire format
    unscripted,    // scripted stub had no rule for the prompt
    injected,      // scripted stub fault
  };

  LlmError(Kind kind, std::string message, int status = 0)
      : std::runtime_error(std::move(message)), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

/// Whitespace-separated token count, used when a backend reports no usage.
std::size_t count_tokens(std::string_view text);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Throws LlmError on failure. Implementations must allow concurrent calls.
  virtual LlmReply complete(const LlmRequest& request) = 0;
};

/// Deterministic offline backend.
///
/// A request is matched against `system + "\n" + user` (just `user` when the
/// system text is empty). Queued replies are tried first, oldest first, and
/// are consumed on use; then rules in insertion order, first substring match
/// wins. No match raises LlmError(unscripted).
class ScriptedLlm final : public LlmClient {
 public:
  ScriptedLlm& on(std::string pattern, std::string reply);
  ScriptedLlm& fail_on(std::string pattern, std::string message = "injected failure");
  ScriptedLlm& enqueue(std::string pattern, std::string reply);
  ScriptedLlm& enqueue_failure(std::string pattern, std::string message = "injected failure");

  /// Loads `{"rules": [{"pattern", "reply" | "error"}], "queue": [...]}`.
  static std::unique_ptr<ScriptedLlm> from_json(std::string_view script);
  static std::unique_ptr<ScriptedLlm> from_file(const std::string& path);

  LlmReply complete(const LlmRequest& request) override;

  /// Requests seen so far, in arrival order.
  std::vector<LlmRequest> calls() const;
  std::size_t call_count(std::string_view pattern) const;

 private:
  struct Rule {
    std::string pattern;
    std::string reply;
    std::optional<std::string> error;
  };

  mutable std::mutex mutex_;
  std::vector<Rule> rules_;
  std::deque<Rule> queue_;
  std::vector<LlmRequest> calls_;
};

struct OpenAiConfig {
  /// Base URL, e.g. "https://api.openai.com/v1" or "http://localhost:8000/v1".
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
};

/// Chat-completions client for OpenAI-compatible HTTP endpoints.
class OpenAiClient final : public LlmClient {
 public:
  explicit OpenAiClient(OpenAiConfig config);
  LlmReply complete(const LlmRequest& request) override;

  const OpenAiConfig& config() const { return config_; }

 private:
  OpenAiConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // request path for chat completions
};

/// Forwards to another client while accumulating usage and call counts.
class MeteredLlm final : public LlmClient {
 public:
  explicit MeteredLlm(LlmClient& inner) : inner_(inner) {}

  LlmReply complete(const LlmRequest& request) override;

  LlmUsage usage() const;
  std::size_t calls() const;

 private:
  LlmClient& inner_;
  mutable std::mutex mutex_;
  LlmUsage usage_;
  std::size_t calls_ = 0;
};

}  // namespace msrag
