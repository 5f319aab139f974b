#include "msrag/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace msrag {

using nlohmann::json;

namespace {

template <typename T>
void read_count(const json& j, const char* key, T& out, std::vector<FieldError>& errors, const std::string& prefix) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_integer()) {
    errors.push_back({prefix + key, std::string(key) + " must be an integer"});
    return;
  }
  auto value = it->get<long long>();
  if (value < 0) {
    errors.push_back({prefix + key, std::string(key) + " must be ≥ 0"});
    return;
  }
  out = static_cast<T>(value);
}

void read_bool(const json& j, const char* key, bool& out, std::vector<FieldError>& errors, const std::string& prefix) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_boolean()) {
    errors.push_back({prefix + key, std::string(key) + " must be a boolean"});
    return;
  }
  out = it->get<bool>();
}

json routing_json(const std::optional<RoutingDecision>& routing) {
  if (!routing) return nullptr;
  json j{{"preferred_source", routing->preferred_source ? json(*routing->preferred_source) : json(nullptr)},
         {"raw_reply", routing->raw_reply},
         {"attempt", routing->attempt}};
  if (routing->error) j["error"] = *routing->error;
  return j;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

}  // namespace

json to_json(const PipelineConfig& c) {
  return {{"top_k_per_source", c.budget.k_per_source},
          {"keep_k", c.budget.keep_k},
          {"preferred_cap", c.budget.preferred_cap},
          {"other_cap", c.budget.other_cap},
          {"selector", std::string(to_string(c.budget.selector))},
          {"rrf_constant", c.budget.rrf_constant},
          {"mode", std::string(to_string(c.budget.mode))},
          {"decompose", c.decompose},
          {"use_reflection", c.use_reflection},
          {"max_reflexion_times", c.max_reflexion_times}};
}

PipelineConfig pipeline_from_json(const json& j, const PipelineConfig& base, std::vector<FieldError>& errors,
                                  const std::string& prefix) {
  PipelineConfig c = base;
  if (!j.is_object()) {
    errors.push_back({prefix.empty() ? "config" : prefix.substr(0, prefix.size() - 1), "must be an object"});
    return c;
  }
  const auto before = errors.size();
  read_count(j, "top_k_per_source", c.budget.k_per_source, errors, prefix);
  read_count(j, "keep_k", c.budget.keep_k, errors, prefix);
  read_count(j, "preferred_cap", c.budget.preferred_cap, errors, prefix);
  read_count(j, "other_cap", c.budget.other_cap, errors, prefix);
  read_count(j, "max_reflexion_times", c.max_reflexion_times, errors, prefix);
  read_bool(j, "decompose", c.decompose, errors, prefix);
  read_bool(j, "use_reflection", c.use_reflection, errors, prefix);
  if (auto it = j.find("selector"); it != j.end()) {
    auto s = it->is_string() ? parse_selector(it->get<std::string>()) : std::nullopt;
    if (s) {
      c.budget.selector = *s;
    } else {
      errors.push_back({prefix + "selector", "selector must be one of score, rrf, judge"});
    }
  }
  if (auto it = j.find("mode"); it != j.end()) {
    auto m = it->is_string() ? parse_mode(it->get<std::string>()) : std::nullopt;
    if (m) {
      c.budget.mode = *m;
    } else {
      errors.push_back({prefix + "mode", "mode must be one of hard, adaptive"});
    }
  }
  if (auto it = j.find("rrf_constant"); it != j.end()) {
    if (it->is_number()) {
      c.budget.rrf_constant = it->get<double>();
    } else {
      errors.push_back({prefix + "rrf_constant", "rrf_constant must be a number"});
    }
  }
  if (errors.size() == before) {
    for (auto& e : c.budget.validate()) errors.push_back({prefix + e.field, e.message});
  }
  return c;
}

json to_json(const EvidenceSet& evidence) {
  json items = json::array();
  for (const auto& item : evidence.items) {
    const auto& c = item.candidate;
    json e{{"id", c.document.id},
           {"source", c.source},
           {"score", c.score},
           {"source_rank", c.source_rank},
           {"selection_score", item.selection_score},
           {"text", c.document.text}};
    if (c.document.title) e["title"] = *c.document.title;
    items.push_back(std::move(e));
  }
  return {{"items", items},
          {"capped_counts", evidence.capped_counts},
          {"cap_applied", evidence.cap_applied},
          {"notes", evidence.notes}};
}

json to_json(const SubqueryResult& r) {
  json attempts = json::array();
  for (const auto& a : r.trace) {
    json failures = json::array();
    for (const auto& f : a.retrieval_failures) failures.push_back({{"source", f.source}, {"message", f.message}});
    json gen{{"answer", a.generation.answer},
             {"reasoning", a.generation.reasoning},
             {"sufficient", a.generation.sufficient},
             {"notes", a.generation.notes}};
    if (a.generation.error) gen["error"] = *a.generation.error;
    attempts.push_back({{"attempt", a.attempt},
                        {"routing", routing_json(a.routing)},
                        {"pool_counts", a.pool_counts},
                        {"retrieval_failures", failures},
                        {"evidence", to_json(a.evidence)},
                        {"generation", gen}});
  }
  json history = json::array();
  for (const auto& e : r.fail_history.entries()) {
    history.push_back({{"subquery", e.subquery}, {"failed_source", e.failed_source}, {"attempt", e.attempt}});
  }
  return {{"index", r.index},
          {"bound_query", r.bound_query},
          {"answer", r.answer},
          {"reasoning", r.reasoning},
          {"sufficient", r.sufficient},
          {"attempts", r.attempts},
          {"fallback", r.fallback},
          {"fail_history", history},
          {"trace", attempts},
          {"notes", r.notes}};
}

json to_json(const RunRecord& record, bool include_timing) {
  json j{{"query_id", record.query_id},
         {"question", record.question},
         {"gold_answers", record.gold_answers},
         {"final_answer", record.final_answer},
         {"em", record.em},
         {"f1", record.f1},
         {"prompt_tokens", record.prompt_tokens}};
  if (record.fault) j["fault"] = *record.fault;
  if (record.run) {
    const auto& run = *record.run;
    json plan = json::array();
    for (const auto& sq : run.plan.subqueries) {
      plan.push_back({{"index", sq.index}, {"template", sq.template_text}, {"depends_on", sq.depends_on}});
    }
    j["plan"] = plan;
    if (run.plan.fallback_reason) j["plan_fallback"] = *run.plan.fallback_reason;
    json subs = json::array();
    for (const auto& s : run.subqueries) subs.push_back(to_json(s));
    j["subqueries"] = subs;
    j["fusion_fallback"] = run.fusion_fallback;
    if (run.fusion_error) j["fusion_error"] = *run.fusion_error;
    j["completion_tokens"] = run.usage.completion_tokens;
    j["llm_calls"] = run.llm_calls;
  }
  if (include_timing) j["wall_ms"] = record.wall_ms;
  return j;
}

json to_json(const ComparisonReport& report, bool include_timing) {
  json arms = json::array();
  for (const auto& arm : report.arms) {
    json records = json::array();
    for (const auto& r : arm.records) records.push_back(to_json(r, include_timing));
    json aggregates{{"em", arm.mean_em}, {"f1", arm.mean_f1}, {"avg_prompt_tokens", arm.mean_prompt_tokens}};
    if (include_timing) aggregates["avg_latency_ms"] = arm.mean_latency_ms;
    arms.push_back({{"name", arm.name}, {"config", to_json(arm.config)}, {"aggregates", aggregates}, {"records", records}});
  }
  return {{"dataset_size", report.dataset_size},
          {"sampled_indices", report.sampled_indices},
          {"query_ids", report.query_ids},
          {"arms", arms}};
}

std::string render_table(const json& report) {
  std::vector<std::array<std::string, 4>> rows{{"Method", "EM", "F1", "Avg Tokens"}};
  for (const auto& arm : report.at("arms")) {
    const auto& agg = arm.at("aggregates");
    rows.push_back({arm.at("name").get<std::string>(), format_fixed(100.0 * agg.at("em").get<double>(), 2),
                    format_fixed(100.0 * agg.at("f1").get<double>(), 2),
                    format_fixed(agg.at("avg_prompt_tokens").get<double>(), 1)});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    out += row[0] + std::string(width[0] - row[0].size(), ' ');
    for (std::size_t c = 1; c < 4; ++c) out += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
    out += '\n';
    if (r == 0) {
      std::size_t total = width[0] + 2 * 3 + width[1] + width[2] + width[3];
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

std::string render_table(const ComparisonReport& report) { return render_table(to_json(report, false)); }

}  // namespace msrag
