#include "msrag/router.hpp"

#include <algorithm>

#include "msrag/prompts.hpp"
#include "msrag/selection.hpp"
#include "msrag/text.hpp"

namespace msrag {

void FailHistory::record(std::string subquery, std::string failed_source, int attempt) {
  entries_.push_back({std::move(subquery), std::move(failed_source), attempt});
}

std::vector<std::string> FailHistory::failed_sources() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::find(out.begin(), out.end(), e.failed_source) == out.end()) out.push_back(e.failed_source);
  }
  return out;
}

std::string FailHistory::render() const {
  if (entries_.empty()) return {};
  return "Previously failed sources for this query: " + text::join(failed_sources(), ", ");
}

std::string render_routing_prompt(std::string_view query, const std::vector<SourceProfile>& profiles,
                                  const FailHistory& history) {
  std::vector<std::string> lines;
  std::vector<std::string> names;
  for (const auto& p : profiles) {
    lines.push_back(p.name + ": " + p.description);
    names.push_back(p.name);
  }
  return text::render(prompts::get(prompts::kRouting), {{"profiles_text", text::join(lines, "\n")},
                                                        {"query", std::string(query)},
                                                        {"fail_history", history.render()},
                                                        {"choices_str", text::join(names, ", ")}});
}

std::optional<std::string> match_source(std::string_view reply, const std::vector<std::string>& names) {
  const auto cleaned = text::to_lower(text::trim(reply));
  for (const auto& name : names) {
    if (text::to_lower(name) == cleaned) return name;
  }
  std::optional<std::string> found;
  for (const auto& name : names) {
    const auto lowered = text::to_lower(name);
    if (lowered.empty() || cleaned.find(lowered) == std::string::npos) continue;
    if (found) return std::nullopt;
    found = name;
  }
  return found;
}

RoutingDecision route(std::string_view query, const std::vector<SourceProfile>& profiles, const FailHistory& history,
                      LlmClient& llm, int attempt) {
  RoutingDecision decision;
  decision.attempt = attempt;
  if (profiles.empty()) return decision;
  if (profiles.size() == 1) {
    decision.preferred_source = profiles.front().name;
    return decision;
  }

  std::vector<std::string> names;
  for (const auto& p : profiles) names.push_back(p.name);
  try {
    LlmRequest request;
    request.user = render_routing_prompt(query, profiles, history);
    request.max_output = 32;
    decision.raw_reply = llm.complete(request).text;
    decision.preferred_source = match_source(decision.raw_reply, names);
  } catch (const std::exception& e) {
    decision.error = e.what();
  }
  return decision;
}

bool should_route(const BudgetConfig& budget) {
  return (budget.preferred_cap > 0 && budget.other_cap > 0) || budget.selector == Selector::judge ||
         budget.mode == RoutingMode::hard;
}

}  // namespace msrag
