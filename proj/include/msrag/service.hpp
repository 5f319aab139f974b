#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msrag/corpus.hpp"
#include "msrag/generation.hpp"
#include "msrag/llm.hpp"

namespace msrag {

struct ServiceOptions {
  /// Runs are persisted under <data_dir>/runs/<id>/, uploads under
  /// <data_dir>/uploads/ and registered in <data_dir>/sources.json.
  std::filesystem::path data_dir = ".msrag";
  std::size_t job_concurrency = 1;
  std::size_t query_concurrency = 1;
  PipelineConfig defaults;
  std::vector<Preset> presets;
  std::optional<std::filesystem::path> static_dir;
};

/// HTTP API over the pipeline.
///
///   GET  /health
///   GET  /sources                      registered source profiles
///   POST /sources                      multipart: file, name, profile, format?
///   GET  /presets
///   POST /runs                         run or comparison request, answers 202
///   GET  /runs/{id}                    state, progress, report once done
///   GET  /runs/{id}/trace/{query_id}   per-arm run records (?arm= for one)
///
/// Jobs run on an in-process queue. Finished runs are read back from disk on
/// construction, so reports survive restarts unchanged.
class Service {
 public:
  Service(SourceRegistry registry, std::shared_ptr<LlmClient> llm, ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket. Returns false when the address is unavailable.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host);
  /// Serves until stop(). Requires a successful bind.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace msrag
