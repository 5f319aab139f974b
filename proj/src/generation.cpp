#include "msrag/generation.hpp"

#include <algorithm>

#include "msrag/prompts.hpp"
#include "msrag/text.hpp"

namespace msrag {

namespace {

enum class Field { none, answer, reasoning, sufficient };

// Recognises "LABEL:" at the start of a line, tolerating markdown emphasis.
std::optional<std::pair<Field, std::string_view>> labelled(std::string_view line) {
  line = text::trim(line);
  while (!line.empty() && (line.front() == '*' || line.front() == '#' || line.front() == '-')) line.remove_prefix(1);
  line = text::trim(line);
  auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto label = text::to_lower(text::trim(line.substr(0, colon)));
  label.erase(std::remove(label.begin(), label.end(), '*'), label.end());
  auto rest = line.substr(colon + 1);
  while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
  rest = text::trim(rest);
  if (label == "answer") return std::pair{Field::answer, rest};
  if (label == "reasoning") return std::pair{Field::reasoning, rest};
  if (label == "sufficient") return std::pair{Field::sufficient, rest};
  return std::nullopt;
}

std::optional<bool> parse_flag(std::string_view value) {
  auto words = text::simple_tokens(value);
  if (words.empty()) return std::nullopt;
  const auto& w = words.front();
  if (w == "yes" || w == "true" || w == "y" || w == "1" || w == "sufficient") return true;
  if (w == "no" || w == "false" || w == "n" || w == "0" || w == "insufficient") return false;
  return std::nullopt;
}

}  // namespace

Generation parse_generation_reply(std::string_view reply) {
  Generation gen;
  std::string flag_text;
  bool saw_answer = false;
  bool saw_flag = false;
  Field current = Field::none;

  std::size_t start = 0;
  while (start <= reply.size()) {
    auto end = reply.find('\n', start);
    auto line = reply.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? reply.size() + 1 : end + 1;

    if (auto l = labelled(line)) {
      current = l->first;
      std::string value(l->second);
      switch (current) {
        case Field::answer: gen.answer = value; saw_answer = true; break;
        case Field::reasoning: gen.reasoning = value; break;
        case Field::sufficient: flag_text = value; saw_flag = true; break;
        case Field::none: break;
      }
      continue;
    }
    auto body = text::trim(line);
    if (body.empty()) continue;
    switch (current) {
      case Field::answer: gen.answer += (gen.answer.empty() ? "" : " ") + std::string(body); break;
      case Field::reasoning: gen.reasoning += (gen.reasoning.empty() ? "" : " ") + std::string(body); break;
      case Field::sufficient: break;
      case Field::none: break;
    }
  }

  if (!saw_answer) {
    gen.answer = std::string(text::trim(reply));
    gen.notes.push_back("reply has no ANSWER line; using the whole reply");
  }
  if (!saw_flag) {
    gen.notes.push_back("reply has no SUFFICIENT line; assuming sufficient");
  } else if (auto flag = parse_flag(flag_text)) {
    gen.sufficient = *flag;
  } else {
    gen.notes.push_back("unreadable SUFFICIENT value '" + flag_text + "'; assuming sufficient");
  }
  return gen;
}

std::string render_synthesis_prompt(std::string_view query, const EvidenceSet& evidence) {
  std::string block;
  for (std::size_t i = 0; i < evidence.items.size(); ++i) {
    const auto& c = evidence.items[i].candidate;
    if (i) block += "\n";
    block += "[" + std::to_string(i + 1) + "] (source: " + c.source + ")";
    if (c.document.title) block += " " + *c.document.title + ":";
    block += " " + c.document.text;
  }
  if (block.empty()) block = "(no evidence retrieved)";
  return text::render(prompts::get(prompts::kSynthesis), {{"query", std::string(query)}, {"evidence", block}});
}

Generation generate_answer(std::string_view bound_query, const EvidenceSet& evidence, LlmClient& llm) {
  LlmRequest request;
  request.user = render_synthesis_prompt(bound_query, evidence);
  try {
    return parse_generation_reply(llm.complete(request).text);
  } catch (const std::exception& e) {
    Generation gen;
    gen.sufficient = false;
    gen.error = e.what();
    return gen;
  }
}

SubqueryResult run_subquery(const Subquery& subquery, const AnswerEnvironment& env, const SourceRegistry& registry,
                            const PipelineConfig& config, LlmClient& llm) {
  SubqueryResult result;
  result.index = subquery.index;
  try {
    result.bound_query = substitute_variables(subquery.template_text, env);
  } catch (const PlanError& e) {
    result.bound_query = subquery.template_text;
    result.notes.push_back(std::string("variable binding failed: ") + e.what());
  }

  const auto profiles = registry.profiles();
  const bool routed = should_route(config.budget);
  const int max_attempts = 1 + (config.use_reflection ? std::max(0, config.max_reflexion_times) : 0);

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    AttemptTrace trace;
    trace.attempt = attempt;
    std::optional<std::string> preferred;
    if (routed) {
      trace.routing = route(result.bound_query, profiles, result.fail_history, llm, attempt);
      preferred = trace.routing->preferred_source;
    }

    auto pool = retrieve_multi_source(result.bound_query, registry, config.budget.k_per_source, config.fan_out);
    trace.pool_counts = pool.per_source_counts;
    trace.retrieval_failures = pool.failures;
    trace.evidence = select_evidence(pool, config.budget, preferred, result.bound_query, &llm);
    trace.generation = generate_answer(result.bound_query, trace.evidence, llm);

    result.attempts = attempt;
    result.answer = trace.generation.answer;
    result.reasoning = trace.generation.reasoning;
    result.sufficient = trace.generation.sufficient;
    result.evidence_used = trace.evidence;
    result.trace.push_back(std::move(trace));

    if (result.sufficient) break;
    if (attempt < max_attempts && preferred) result.fail_history.record(result.bound_query, *preferred, attempt);
  }
  result.fallback = !result.sufficient;
  return result;
}

Fusion fuse_answers(std::string_view question, const std::vector<SubqueryResult>& results, LlmClient& llm) {
  Fusion fusion;
  if (results.empty()) {
    fusion.fallback = true;
    fusion.error = "no sub-query results";
    return fusion;
  }
  if (results.size() == 1) {
    fusion.answer = results.front().answer;
    return fusion;
  }

  std::vector<std::string> lines;
  for (const auto& r : results) {
    lines.push_back(std::to_string(r.index) + ". " + r.bound_query + " -> " + r.answer);
  }
  LlmRequest request;
  request.user = text::render(prompts::get(prompts::kFusion),
                              {{"question", std::string(question)}, {"answers", text::join(lines, "\n")}});
  try {
    auto reply = std::string(text::trim(llm.complete(request).text));
    if (auto l = text::to_lower(reply.substr(0, 7)); l == "answer:") reply = std::string(text::trim(reply.substr(7)));
    fusion.answer = reply;
  } catch (const std::exception& e) {
    fusion.answer = results.back().answer;
    fusion.fallback = true;
    fusion.error = e.what();
  }
  return fusion;
}

}  // namespace msrag
