#include "msrag/pipeline.hpp"

#include <chrono>

namespace msrag {

QuestionRun run_question(std::string_view question, const SourceRegistry& registry, const PipelineConfig& config,
                         LlmClient& llm) {
  const auto started = std::chrono::steady_clock::now();
  MeteredLlm metered(llm);

  QuestionRun run;
  run.question = std::string(question);
  run.plan = config.decompose ? decompose(question, metered) : identity_plan(question);

  AnswerEnvironment env;
  for (const auto& sq : run.plan.subqueries) {
    auto result = run_subquery(sq, env, registry, config, metered);
    env[sq.index] = result.answer;
    run.subqueries.push_back(std::move(result));
  }

  auto fusion = fuse_answers(question, run.subqueries, metered);
  run.final_answer = fusion.answer;
  run.fusion_fallback = fusion.fallback;
  run.fusion_error = fusion.error;
  run.usage = metered.usage();
  run.llm_calls = metered.calls();
  run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return run;
}

}  // namespace msrag
