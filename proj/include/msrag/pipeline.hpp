#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/generation.hpp"

namespace msrag {

/// Full trace of answering one question.
struct QuestionRun {
  std::string question;
  SubqueryPlan plan;
  std::vector<SubqueryResult> subqueries;
  std::string final_answer;
  bool fusion_fallback = false;
  std::optional<std::string> fusion_error;
  LlmUsage usage;
  std::size_t llm_calls = 0;
  double wall_ms = 0.0;
};

/// Plans, answers every sub-query in index order with answers bound into
/// later steps, and fuses the results.
QuestionRun run_question(std::string_view question, const SourceRegistry& registry, const PipelineConfig& config,
                         LlmClient& llm);

}  // namespace msrag
