#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/pipeline.hpp"

namespace msrag {

const std::set<std::string>& default_stopwords();

/// Lowercase, strip ASCII punctuation, split on whitespace, drop stopwords.
std::vector<std::string> normalize(std::string_view text, const std::set<std::string>& stopwords = default_stopwords());

int exact_match(std::string_view prediction, std::string_view gold);
/// Token-level F1 over multiset overlap of normalised tokens. Both sides
/// empty gives 1, exactly one side empty gives 0.
double f1(std::string_view prediction, std::string_view gold);

/// Best score over several gold aliases (0 when `golds` is empty).
int exact_match_any(std::string_view prediction, const std::vector<std::string>& golds);
double f1_any(std::string_view prediction, const std::vector<std::string>& golds);

/// floor(i * dataset_size / n) for i in [0, n). Requires 1 <= n <= dataset_size.
std::vector<std::size_t> sample_indices(std::size_t dataset_size, std::size_t n);

struct QueryItem {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
  std::optional<std::string> gold_source;
};

/// One JSON object per line: {"id", "question", "answers": [...] | "answer", "gold_source"?}.
std::vector<QueryItem> parse_dataset(std::string_view jsonl);
std::vector<QueryItem> load_dataset(const std::filesystem::path& path);

struct Arm {
  std::string name;
  PipelineConfig config;
};

/// The single-source baseline: same pipeline, mode forced to hard.
Arm hard_routing_arm(PipelineConfig base);
Arm adaptive_cap_arm(PipelineConfig base);

struct RunRecord {
  std::string query_id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::optional<QuestionRun> run;
  std::string final_answer;
  int em = 0;
  double f1 = 0.0;
  std::size_t prompt_tokens = 0;
  double wall_ms = 0.0;
  /// Set when the pipeline threw; the query then scores 0.
  std::optional<std::string> fault;
};

struct ArmReport {
  std::string name;
  PipelineConfig config;
  double mean_em = 0.0;
  double mean_f1 = 0.0;
  double mean_prompt_tokens = 0.0;
  double mean_latency_ms = 0.0;
  std::vector<RunRecord> records;  // in sampled query order
};

struct ComparisonReport {
  std::size_t dataset_size = 0;
  std::vector<std::size_t> sampled_indices;
  std::vector<std::string> query_ids;
  std::vector<ArmReport> arms;
};

struct EvalConfig {
  std::size_t sample_size = 0;  // 0 means the whole dataset
  std::vector<Arm> arms;
  std::size_t concurrency = 1;  // queries in flight per arm
  /// Polled before each query; once true, remaining queries are recorded as
  /// cancelled faults.
  std::function<bool()> should_stop;
};

using ProgressCallback = std::function<void(const std::string& arm, const RunRecord& record)>;

/// Answers one query and scores it. Never throws.
RunRecord evaluate_query(const QueryItem& item, const SourceRegistry& registry, const PipelineConfig& config,
                         LlmClient& llm);

/// Runs every arm over the same evenly spaced sample of `dataset`.
ComparisonReport run_comparison(const EvalConfig& config, const std::vector<QueryItem>& dataset,
                                const SourceRegistry& registry, LlmClient& llm, const ProgressCallback& progress = {});

}  // namespace msrag
