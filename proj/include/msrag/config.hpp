#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msrag/generation.hpp"
#include "msrag/llm.hpp"

namespace msrag {

struct LlmSettings {
  std::string backend = "stub";  // "stub" or "openai"
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  /// Name of the environment variable holding the API key. The key itself is
  /// only ever read from the environment.
  std::string api_key_env = "OPENAI_API_KEY";
  std::string stub_script;
};

/// Merged view of defaults, config file, environment and flags.
struct CliConfig {
  PipelineConfig pipeline;
  std::size_t sample_size = 0;
  LlmSettings llm;
  std::string data_dir = ".msrag";
  std::string sources_manifest;  // empty: <data_dir>/sources.json
  std::string presets;           // preset manifest file
  std::string preset;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t concurrency = 1;

  std::string effective_sources_manifest() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One configurable setting and its names in each layer.
struct ConfigField {
  std::string key;   // config file key, e.g. "keep_k"
  std::string env;   // e.g. "MSRAG_KEEP_K"
  std::string flag;  // e.g. "--keep-k"
  std::string help;
  std::function<void(CliConfig&, const std::string&)> assign;  // throws ConfigError
  std::function<std::string(const CliConfig&)> read;
};

const std::vector<ConfigField>& config_fields();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Applies defaults < file < environment < flags. `flags` is keyed by
/// ConfigField::key. Throws ConfigError on unparsable values and on budget
/// invariant violations.
CliConfig resolve_config(const nlohmann::json* file, const EnvLookup& env,
                         const std::map<std::string, std::string>& flags);

nlohmann::json load_config_file(const std::string& path);

/// Builds the configured backend. Throws ConfigError when the stub script or
/// API key is missing.
std::unique_ptr<LlmClient> make_llm(const LlmSettings& settings, const EnvLookup& env);

}  // namespace msrag
