#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/corpus.hpp"
#include "msrag/llm.hpp"
#include "msrag/planner.hpp"
#include "msrag/retrieval.hpp"
#include "msrag/router.hpp"
#include "msrag/selection.hpp"

namespace msrag {

struct PipelineConfig {
  BudgetConfig budget;
  bool decompose = true;
  bool use_reflection = true;
  int max_reflexion_times = 2;
  FanOut fan_out = FanOut::parallel;
};

/// One parsed synthesis reply.
struct Generation {
  std::string answer;
  std::string reasoning;
  bool sufficient = true;
  std::vector<std::string> notes;
  std::optional<std::string> error;
};

/// Parses labelled ANSWER / REASONING / SUFFICIENT lines. A missing or
/// unreadable SUFFICIENT flag counts as sufficient and adds a note.
Generation parse_generation_reply(std::string_view reply);

std::string render_synthesis_prompt(std::string_view query, const EvidenceSet& evidence);

/// Single synthesis call. Transport errors give sufficient = false and an
/// empty answer.
Generation generate_answer(std::string_view bound_query, const EvidenceSet& evidence, LlmClient& llm);

/// Everything one retrieve-select-generate attempt did.
struct AttemptTrace {
  int attempt = 1;
  std::optional<RoutingDecision> routing;  // empty when routing was skipped
  std::map<std::string, std::size_t> pool_counts;
  std::vector<SourceFailure> retrieval_failures;
  EvidenceSet evidence;
  Generation generation;
};

struct SubqueryResult {
  std::size_t index = 1;
  std::string bound_query;
  std::string answer;
  std::string reasoning;
  bool sufficient = false;
  int attempts = 0;
  /// True when the last attempt still reported insufficient evidence.
  bool fallback = false;
  /// Evidence behind the returned answer (last attempt).
  EvidenceSet evidence_used;
  FailHistory fail_history;
  std::vector<AttemptTrace> trace;
  std::vector<std::string> notes;
};

/// Binds the sub-query, then runs route? -> retrieve -> cap -> select ->
/// generate. While the generator flags insufficient evidence and reflection
/// is on, the routed source is added to the fail history and the whole chain
/// reruns, at most max_reflexion_times extra times.
SubqueryResult run_subquery(const Subquery& subquery, const AnswerEnvironment& env, const SourceRegistry& registry,
                            const PipelineConfig& config, LlmClient& llm);

struct Fusion {
  std::string answer;
  bool fallback = false;
  std::optional<std::string> error;
};

/// Combines sub-query answers. A single result is returned as is without an
/// LLM call; a failed fusion call falls back to the last sub-query answer.
Fusion fuse_answers(std::string_view question, const std::vector<SubqueryResult>& results, LlmClient& llm);

}  // namespace msrag
