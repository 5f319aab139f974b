#include "msrag/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "msrag/text.hpp"

namespace msrag {

namespace {

std::size_t parse_count(const std::string& key, const std::string& value) {
  auto v = text::trim(value);
  std::size_t pos = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(std::string(v), &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (v.empty() || pos != v.size() || parsed < 0) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return static_cast<std::size_t>(parsed);
}

double parse_real(const std::string& key, const std::string& value) {
  auto v = std::string(text::trim(value));
  std::size_t pos = 0;
  double parsed = 0;
  try {
    parsed = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (v.empty() || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + value + "'");
  return parsed;
}

bool parse_bool(const std::string& key, const std::string& value) {
  auto v = text::to_lower(text::trim(value));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

ConfigField field(std::string key, std::string help, std::function<void(CliConfig&, const std::string&)> assign,
                  std::function<std::string(const CliConfig&)> read) {
  std::string env = "MSRAG_";
  for (char c : key) env.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  std::string flag = "--";
  for (char c : key) flag.push_back(c == '_' ? '-' : c);
  return {std::move(key), std::move(env), std::move(flag), std::move(help), std::move(assign), std::move(read)};
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

std::string CliConfig::effective_sources_manifest() const {
  return sources_manifest.empty() ? data_dir + "/sources.json" : sources_manifest;
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back(field(
        "top_k_per_source", "candidates retrieved from each source",
        [](CliConfig& c, const std::string& v) { c.pipeline.budget.k_per_source = parse_count("top_k_per_source", v); },
        [](const CliConfig& c) { return std::to_string(c.pipeline.budget.k_per_source); }));
    f.push_back(field(
        "keep_k", "final evidence budget",
        [](CliConfig& c, const std::string& v) { c.pipeline.budget.keep_k = parse_count("keep_k", v); },
        [](const CliConfig& c) { return std::to_string(c.pipeline.budget.keep_k); }));
    f.push_back(field(
        "selector", "score | rrf | judge",
        [](CliConfig& c, const std::string& v) {
          auto s = parse_selector(v);
          if (!s) throw ConfigError("selector: expected score, rrf or judge, got '" + v + "'");
          c.pipeline.budget.selector = *s;
        },
        [](const CliConfig& c) { return std::string(to_string(c.pipeline.budget.selector)); }));
    f.push_back(field(
        "preferred_cap", "cap for the routed source",
        [](CliConfig& c, const std::string& v) { c.pipeline.budget.preferred_cap = parse_count("preferred_cap", v); },
        [](const CliConfig& c) { return std::to_string(c.pipeline.budget.preferred_cap); }));
    f.push_back(field(
        "other_cap", "cap for every other source",
        [](CliConfig& c, const std::string& v) { c.pipeline.budget.other_cap = parse_count("other_cap", v); },
        [](const CliConfig& c) { return std::to_string(c.pipeline.budget.other_cap); }));
    f.push_back(field(
        "rrf_constant", "RRF smoothing constant",
        [](CliConfig& c, const std::string& v) { c.pipeline.budget.rrf_constant = parse_real("rrf_constant", v); },
        [](const CliConfig& c) { return nlohmann::json(c.pipeline.budget.rrf_constant).dump(); }));
    f.push_back(field(
        "mode", "hard | adaptive",
        [](CliConfig& c, const std::string& v) {
          auto m = parse_mode(v);
          if (!m) throw ConfigError("mode: expected hard or adaptive, got '" + v + "'");
          c.pipeline.budget.mode = *m;
        },
        [](const CliConfig& c) { return std::string(to_string(c.pipeline.budget.mode)); }));
    f.push_back(field(
        "decompose", "split questions into sub-queries",
        [](CliConfig& c, const std::string& v) { c.pipeline.decompose = parse_bool("decompose", v); },
        [](const CliConfig& c) { return std::string(c.pipeline.decompose ? "true" : "false"); }));
    f.push_back(field(
        "use_reflection", "retry when evidence is insufficient",
        [](CliConfig& c, const std::string& v) { c.pipeline.use_reflection = parse_bool("use_reflection", v); },
        [](const CliConfig& c) { return std::string(c.pipeline.use_reflection ? "true" : "false"); }));
    f.push_back(field(
        "max_reflexion_times", "extra attempts per sub-query",
        [](CliConfig& c, const std::string& v) {
          c.pipeline.max_reflexion_times = static_cast<int>(parse_count("max_reflexion_times", v));
        },
        [](const CliConfig& c) { return std::to_string(c.pipeline.max_reflexion_times); }));
    f.push_back(field(
        "sample_size", "queries evaluated per arm (0 = all)",
        [](CliConfig& c, const std::string& v) { c.sample_size = parse_count("sample_size", v); },
        [](const CliConfig& c) { return std::to_string(c.sample_size); }));
    f.push_back(field(
        "llm_backend", "stub | openai",
        [](CliConfig& c, const std::string& v) {
          auto b = text::to_lower(text::trim(v));
          if (b != "stub" && b != "openai") throw ConfigError("llm_backend: expected stub or openai, got '" + v + "'");
          c.llm.backend = b;
        },
        [](const CliConfig& c) { return c.llm.backend; }));
    f.push_back(field(
        "llm_endpoint", "OpenAI-compatible base URL",
        [](CliConfig& c, const std::string& v) { c.llm.endpoint = v; }, [](const CliConfig& c) { return c.llm.endpoint; }));
    f.push_back(field(
        "llm_model", "model name", [](CliConfig& c, const std::string& v) { c.llm.model = v; },
        [](const CliConfig& c) { return c.llm.model; }));
    f.push_back(field(
        "api_key_env", "environment variable holding the API key",
        [](CliConfig& c, const std::string& v) { c.llm.api_key_env = v; },
        [](const CliConfig& c) { return c.llm.api_key_env; }));
    f.push_back(field(
        "stub_script", "scripted stub replies (JSON)", [](CliConfig& c, const std::string& v) { c.llm.stub_script = v; },
        [](const CliConfig& c) { return c.llm.stub_script; }));
    f.push_back(field(
        "data_dir", "state directory", [](CliConfig& c, const std::string& v) { c.data_dir = v; },
        [](const CliConfig& c) { return c.data_dir; }));
    f.push_back(field(
        "sources_manifest", "registered sources file",
        [](CliConfig& c, const std::string& v) { c.sources_manifest = v; },
        [](const CliConfig& c) { return c.sources_manifest; }));
    f.push_back(field(
        "presets", "preset manifest file", [](CliConfig& c, const std::string& v) { c.presets = v; },
        [](const CliConfig& c) { return c.presets; }));
    f.push_back(field(
        "preset", "preset to load sources from", [](CliConfig& c, const std::string& v) { c.preset = v; },
        [](const CliConfig& c) { return c.preset; }));
    f.push_back(field(
        "host", "bind address", [](CliConfig& c, const std::string& v) { c.host = v; },
        [](const CliConfig& c) { return c.host; }));
    f.push_back(field(
        "port", "HTTP port",
        [](CliConfig& c, const std::string& v) {
          auto p = parse_count("port", v);
          if (p > 65535) throw ConfigError("port: out of range");
          c.port = static_cast<int>(p);
        },
        [](const CliConfig& c) { return std::to_string(c.port); }));
    f.push_back(field(
        "concurrency", "queries or jobs in flight",
        [](CliConfig& c, const std::string& v) {
          auto n = parse_count("concurrency", v);
          if (n < 1) throw ConfigError("concurrency: must be ≥ 1");
          c.concurrency = n;
        },
        [](const CliConfig& c) { return std::to_string(c.concurrency); }));
    return f;
  }();
  return fields;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

CliConfig resolve_config(const nlohmann::json* file, const EnvLookup& env,
                         const std::map<std::string, std::string>& flags) {
  CliConfig config;
  for (const auto& f : config_fields()) {
    if (file && file->is_object()) {
      if (auto it = file->find(f.key); it != file->end() && !it->is_null()) f.assign(config, json_scalar(*it));
    }
    if (env) {
      if (auto v = env(f.env)) f.assign(config, *v);
    }
    if (auto it = flags.find(f.key); it != flags.end()) f.assign(config, it->second);
  }
  if (auto errors = config.pipeline.budget.validate(); !errors.empty()) {
    std::string message;
    for (const auto& e : errors) message += (message.empty() ? "" : "; ") + e.message;
    throw ConfigError(message);
  }
  return config;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError(path + ": expected a JSON object");
  return j;
}

std::unique_ptr<LlmClient> make_llm(const LlmSettings& settings, const EnvLookup& env) {
  if (settings.backend == "stub") {
    if (settings.stub_script.empty()) throw ConfigError("stub backend needs --stub-script");
    try {
      return ScriptedLlm::from_file(settings.stub_script);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cannot load stub script: ") + e.what());
    }
  }
  OpenAiConfig oc;
  oc.endpoint = settings.endpoint;
  oc.model = settings.model;
  if (env) {
    if (auto key = env(settings.api_key_env)) oc.api_key = *key;
  }
  return std::make_unique<OpenAiClient>(std::move(oc));
}

}  // namespace msrag
