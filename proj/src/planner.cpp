#include "msrag/planner.hpp"

#include <cctype>
#include <charconv>

#include "msrag/prompts.hpp"
#include "msrag/text.hpp"

namespace msrag {

namespace {

constexpr std::string_view kPlaceholderOpen = "{ans:";

// Parses "{ans:<digits>}" at `pos`; returns (index, length) on success.
std::optional<std::pair<std::size_t, std::size_t>> placeholder_at(std::string_view text, std::size_t pos) {
  if (text.substr(pos, kPlaceholderOpen.size()) != kPlaceholderOpen) return std::nullopt;
  std::size_t i = pos + kPlaceholderOpen.size();
  std::size_t start = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == start || i >= text.size() || text[i] != '}') return std::nullopt;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + i, value);
  if (ec != std::errc{}) return std::nullopt;
  return std::pair{value, i + 1 - pos};
}

std::optional<std::size_t> parse_index(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '#')) s = text::trim(s.substr(1));
  while (!s.empty() && (s.back() == '.' || s.back() == ')')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<std::set<std::size_t>> parse_depends(std::string_view s) {
  std::set<std::size_t> out;
  auto lowered = text::to_lower(text::trim(s));
  if (lowered.empty() || lowered == "-" || lowered == "none" || lowered == "[]") return out;
  std::string_view rest = lowered;
  if (rest.front() == '[' && rest.back() == ']') rest = rest.substr(1, rest.size() - 2);
  std::size_t start = 0;
  while (start <= rest.size()) {
    auto comma = rest.find(',', start);
    auto piece = rest.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!text::trim(piece).empty()) {
      auto idx = parse_index(piece);
      if (!idx) return std::nullopt;
      out.insert(*idx);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

SubqueryPlan identity_plan(std::string_view question) {
  SubqueryPlan plan;
  plan.subqueries.push_back({1, std::string(question), {}});
  return plan;
}

std::set<std::size_t> placeholders(std::string_view text) {
  std::set<std::size_t> out;
  for (std::size_t pos = text.find(kPlaceholderOpen); pos != std::string_view::npos;
       pos = text.find(kPlaceholderOpen, pos + 1)) {
    if (auto p = placeholder_at(text, pos)) out.insert(p->first);
  }
  return out;
}

std::optional<SubqueryPlan> parse_plan(std::string_view reply) {
  SubqueryPlan plan;
  std::size_t line_start = 0;
  while (line_start <= reply.size()) {
    auto line_end = reply.find('\n', line_start);
    auto line = reply.substr(line_start, line_end == std::string_view::npos ? std::string_view::npos
                                                                             : line_end - line_start);
    line_start = line_end == std::string_view::npos ? reply.size() + 1 : line_end + 1;

    auto first = line.find('|');
    if (first == std::string_view::npos) continue;
    auto second = line.find('|', first + 1);
    if (second == std::string_view::npos) continue;
    auto index = parse_index(line.substr(0, first));
    auto depends = parse_depends(line.substr(first + 1, second - first - 1));
    auto tmpl = text::trim(line.substr(second + 1));
    if (!index || !depends || tmpl.empty()) continue;

    Subquery sq{*index, std::string(tmpl), *depends};
    for (auto ref : placeholders(sq.template_text)) {
      if (ref >= 1 && ref < sq.index) sq.depends_on.insert(ref);
    }
    plan.subqueries.push_back(std::move(sq));
  }
  if (plan.subqueries.empty()) return std::nullopt;
  for (std::size_t i = 0; i < plan.subqueries.size(); ++i) {
    if (plan.subqueries[i].index != i + 1) return std::nullopt;
  }
  if (!is_valid_plan(plan)) return std::nullopt;
  return plan;
}

bool is_valid_plan(const SubqueryPlan& plan) {
  if (plan.subqueries.empty()) return false;
  for (std::size_t i = 0; i < plan.subqueries.size(); ++i) {
    const auto& sq = plan.subqueries[i];
    if (sq.index != i + 1 || text::trim(sq.template_text).empty()) return false;
    for (auto d : sq.depends_on) {
      if (d < 1 || d >= sq.index) return false;
    }
    for (auto ref : placeholders(sq.template_text)) {
      if (!sq.depends_on.contains(ref)) return false;
    }
  }
  return true;
}

SubqueryPlan decompose(std::string_view question, LlmClient& llm) {
  std::string last_reply;
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    LlmRequest request;
    request.user = attempt == 0
                       ? text::render(prompts::get(prompts::kDecompose), {{"question", std::string(question)}})
                       : text::render(prompts::get(prompts::kDecomposeRetry),
                                      {{"question", std::string(question)}, {"previous", last_reply}});
    try {
      last_reply = llm.complete(request).text;
    } catch (const std::exception& e) {
      problem = std::string("decomposition call failed: ") + e.what();
      break;
    }
    if (auto plan = parse_plan(last_reply)) return *plan;
    problem = "unparseable decomposition output";
  }
  auto plan = identity_plan(question);
  plan.fallback_reason = problem;
  return plan;
}

std::string substitute_variables(std::string_view tmpl, const AnswerEnvironment& env) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      if (auto p = placeholder_at(tmpl, i)) {
        auto it = env.find(p->first);
        if (it == env.end()) throw PlanError("unresolved placeholder " + std::to_string(p->first));
        out.append(it->second);
        i += p->second;
        continue;
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace msrag
