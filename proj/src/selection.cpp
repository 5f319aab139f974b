#include "msrag/selection.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "msrag/prompts.hpp"
#include "msrag/text.hpp"

namespace msrag {

namespace {

std::map<std::string, std::size_t> count_by_source(const CandidatePool& pool) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : pool.source_order) counts[s] = 0;
  for (const auto& c : pool.candidates) ++counts[c.source];
  return counts;
}

// Orders (score, candidate) pairs: score descending, then registry source
// order, then ascending document id.
EvidenceSet rank_and_truncate(const CandidatePool& pool, std::vector<EvidenceItem> items, std::size_t keep_k) {
  std::vector<std::size_t> position(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) position[i] = pool.source_position(items[i].candidate.source);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = items[a];
    const auto& y = items[b];
    if (x.selection_score != y.selection_score) return x.selection_score > y.selection_score;
    if (position[a] != position[b]) return position[a] < position[b];
    return x.candidate.document.id < y.candidate.document.id;
  });
  if (order.size() > keep_k) order.resize(keep_k);

  EvidenceSet out;
  out.items.reserve(order.size());
  for (auto i : order) out.items.push_back(std::move(items[i]));
  out.capped_counts = count_by_source(pool);
  return out;
}

}  // namespace

std::optional<Selector> parse_selector(std::string_view s) {
  auto v = text::to_lower(text::trim(s));
  if (v == "score") return Selector::score;
  if (v == "rrf") return Selector::rrf;
  if (v == "judge" || v == "llm" || v == "routing-weighted" || v == "routing_weighted") return Selector::judge;
  return std::nullopt;
}

std::string_view to_string(Selector s) {
  switch (s) {
    case Selector::score: return "score";
    case Selector::rrf: return "rrf";
    case Selector::judge: return "judge";
  }
  return "score";
}

std::optional<RoutingMode> parse_mode(std::string_view s) {
  auto v = text::to_lower(text::trim(s));
  if (v == "adaptive") return RoutingMode::adaptive;
  if (v == "hard") return RoutingMode::hard;
  return std::nullopt;
}

std::string_view to_string(RoutingMode m) { return m == RoutingMode::hard ? "hard" : "adaptive"; }

std::vector<FieldError> BudgetConfig::validate() const {
  std::vector<FieldError> errors;
  if (k_per_source < 1) errors.push_back({"top_k_per_source", "top_k_per_source must be ≥ 1"});
  if (keep_k < 1) errors.push_back({"keep_k", "keep_k must be ≥ 1"});
  if (!(rrf_constant > 0.0)) errors.push_back({"rrf_constant", "rrf_constant must be > 0"});
  return errors;
}

std::size_t BudgetConfig::effective_preferred_cap() const {
  return std::min(mode == RoutingMode::hard ? keep_k : preferred_cap, k_per_source);
}

std::size_t BudgetConfig::effective_other_cap() const {
  return mode == RoutingMode::hard ? 0 : std::min(other_cap, k_per_source);
}

CandidatePool cap_per_source(const CandidatePool& pool, const std::string& preferred, std::size_t preferred_cap,
                             std::size_t other_cap) {
  CandidatePool out;
  out.source_order = pool.source_order;
  out.failures = pool.failures;
  for (const auto& s : pool.source_order) out.per_source_counts[s] = 0;
  for (const auto& c : pool.candidates) {
    const auto cap = c.source == preferred ? preferred_cap : other_cap;
    if (c.source_rank <= cap) {
      out.candidates.push_back(c);
      ++out.per_source_counts[c.source];
    }
  }
  return out;
}

CandidatePool apply_adaptive_cap(const CandidatePool& pool, const std::optional<std::string>& preferred,
                                 std::size_t preferred_cap, std::size_t other_cap) {
  if (!preferred || preferred_cap == 0 || other_cap == 0) return pool;
  return cap_per_source(pool, *preferred, preferred_cap, other_cap);
}

EvidenceSet select_score(const CandidatePool& pool, std::size_t keep_k) {
  std::vector<EvidenceItem> items;
  items.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) items.push_back({c, c.score});
  return rank_and_truncate(pool, std::move(items), keep_k);
}

EvidenceSet select_rrf(const CandidatePool& pool, std::size_t keep_k, double rrf_constant) {
  std::vector<EvidenceItem> items;
  std::unordered_map<std::string, std::size_t> by_id;
  for (const auto& c : pool.candidates) {
    const double contribution = 1.0 / (rrf_constant + static_cast<double>(c.source_rank));
    auto [it, inserted] = by_id.try_emplace(c.document.id, items.size());
    if (inserted) {
      items.push_back({c, contribution});
    } else {
      items[it->second].selection_score += contribution;
    }
  }
  return rank_and_truncate(pool, std::move(items), keep_k);
}

std::optional<double> parse_judge_grade(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) continue;
    long value = 0;
    while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i])) && value <= 100) {
      value = value * 10 + (reply[i] - '0');
      ++i;
    }
    return static_cast<double>(std::clamp(value, 0L, 10L)) / 10.0;
  }
  return std::nullopt;
}

std::vector<double> normalized_scores(const CandidatePool& pool) {
  std::vector<double> out(pool.candidates.size(), 1.0);
  if (pool.candidates.empty()) return out;
  auto [lo, hi] = std::minmax_element(pool.candidates.begin(), pool.candidates.end(),
                                      [](const auto& a, const auto& b) { return a.score < b.score; });
  const double min = lo->score;
  const double range = hi->score - min;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (pool.candidates[i].score - min) / range;
  return out;
}

EvidenceSet select_judge(const CandidatePool& pool, std::string_view query, std::size_t keep_k, LlmClient& llm) {
  const auto normalized = normalized_scores(pool);
  const auto& tmpl = prompts::get(prompts::kJudge);

  struct Grade {
    std::optional<double> value;
    std::string problem;
  };
  std::vector<std::future<Grade>> pending;
  pending.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) {
    pending.push_back(std::async(std::launch::async, [&, &c = c] {
      Grade g;
      try {
        LlmRequest request;
        request.user = text::render(tmpl, {{"query", std::string(query)}, {"source", c.source}, {"passage", c.document.text}});
        request.max_output = 8;
        auto reply = llm.complete(request).text;
        g.value = parse_judge_grade(reply);
        if (!g.value) g.problem = "unparseable grade '" + std::string(text::trim(reply)) + "'";
      } catch (const std::exception& e) {
        g.problem = e.what();
      }
      return g;
    }));
  }

  std::vector<std::string> notes;
  std::vector<EvidenceItem> items;
  items.reserve(pool.candidates.size());
  for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
    auto grade = pending[i].get();
    const auto& c = pool.candidates[i];
    if (grade.value) {
      items.push_back({c, *grade.value * normalized[i]});
    } else {
      items.push_back({c, normalized[i]});
      notes.push_back("judge fallback for " + c.source + "/" + c.document.id + ": " + grade.problem);
    }
  }
  auto out = rank_and_truncate(pool, std::move(items), keep_k);
  out.notes = std::move(notes);
  return out;
}

EvidenceSet select_evidence(const CandidatePool& pool, const BudgetConfig& budget,
                            const std::optional<std::string>& preferred, std::string_view query, LlmClient* llm) {
  CandidatePool capped;
  bool cap_applied = false;
  std::vector<std::string> notes;
  if (budget.mode == RoutingMode::hard) {
    if (preferred) {
      capped = cap_per_source(pool, *preferred, budget.effective_preferred_cap(), 0);
      cap_applied = true;
    } else {
      capped = pool;
      notes.push_back("hard routing without a preferred source; using the uncapped pool");
    }
  } else {
    const auto pref_cap = budget.effective_preferred_cap();
    const auto other_cap = budget.effective_other_cap();
    cap_applied = preferred && pref_cap > 0 && other_cap > 0;
    capped = apply_adaptive_cap(pool, preferred, pref_cap, other_cap);
  }

  EvidenceSet out;
  switch (budget.selector) {
    case Selector::score:
      out = select_score(capped, budget.keep_k);
      break;
    case Selector::rrf:
      out = select_rrf(capped, budget.keep_k, budget.rrf_constant);
      break;
    case Selector::judge:
      if (!llm) throw std::invalid_argument("judge selector requires an LLM client");
      out = select_judge(capped, query, budget.keep_k, *llm);
      break;
  }
  out.cap_applied = cap_applied;
  notes.insert(notes.end(), out.notes.begin(), out.notes.end());
  out.notes = std::move(notes);
  return out;
}

}  // namespace msrag
