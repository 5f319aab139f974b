#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/llm.hpp"

namespace msrag {

struct Subquery {
  std::size_t index = 1;  // 1-based
  std::string template_text;
  std::set<std::size_t> depends_on;
};

/// Sub-queries in execution order. Answers of earlier steps are referenced
/// with `{ans:<index>}` placeholders.
struct SubqueryPlan {
  std::vector<Subquery> subqueries;
  /// Set when decomposition failed and the identity plan was used instead.
  std::optional<std::string> fallback_reason;
};

using AnswerEnvironment = std::map<std::size_t, std::string>;

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The single-step plan [(1, question, {})].
SubqueryPlan identity_plan(std::string_view question);

/// Indices referenced by `{ans:i}` tokens in `text`.
std::set<std::size_t> placeholders(std::string_view text);

/// Parses the line format `index | depends_on | template`. Lines that do not
/// have this shape are skipped. Placeholders that point at an earlier step
/// missing from depends_on are added to it. Returns nullopt when no valid
/// step is found or indices are not 1..n in order.
std::optional<SubqueryPlan> parse_plan(std::string_view reply);

/// Checks depends_on ⊆ {1..index-1} and that every placeholder is declared.
bool is_valid_plan(const SubqueryPlan& plan);

/// Asks the LLM for a plan, retries once with a reformat prompt, then falls
/// back to identity_plan. Never throws.
SubqueryPlan decompose(std::string_view question, LlmClient& llm);

/// Replaces each `{ans:i}` with env[i]. Throws PlanError("unresolved
/// placeholder i") when i is missing.
std::string substitute_variables(std::string_view tmpl, const AnswerEnvironment& env);

}  // namespace msrag
