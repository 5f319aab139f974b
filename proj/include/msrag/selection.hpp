#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/llm.hpp"
#include "msrag/retrieval.hpp"

namespace msrag {

enum class Selector { score, rrf, judge };
enum class RoutingMode { adaptive, hard };

std::optional<Selector> parse_selector(std::string_view s);
std::string_view to_string(Selector s);
std::optional<RoutingMode> parse_mode(std::string_view s);
std::string_view to_string(RoutingMode m);

struct FieldError {
  std::string field;
  std::string message;
};

/// Evidence budget for one sub-query.
///
/// In hard mode the caps are overridden: the routed source keeps up to
/// keep_k candidates and every other source is cut to zero, even though a
/// zero cap would otherwise mean "no capping".
struct BudgetConfig {
  std::size_t k_per_source = 5;
  std::size_t keep_k = 5;
  std::size_t preferred_cap = 3;
  std::size_t other_cap = 1;
  Selector selector = Selector::score;
  double rrf_constant = 60.0;
  RoutingMode mode = RoutingMode::adaptive;

  std::vector<FieldError> validate() const;
  std::size_t effective_preferred_cap() const;
  std::size_t effective_other_cap() const;
};

struct EvidenceItem {
  ScoredCandidate candidate;
  double selection_score = 0.0;
};

/// Final evidence, best first.
struct EvidenceSet {
  std::vector<EvidenceItem> items;
  /// Per-source candidate counts of the pool the selector saw.
  std::map<std::string, std::size_t> capped_counts;
  bool cap_applied = false;
  /// Selector fallbacks and other non-fatal events.
  std::vector<std::string> notes;
};

/// Keeps the `preferred_cap` best-ranked candidates of `preferred` and the
/// `other_cap` best-ranked of every other source, preserving pool order.
CandidatePool cap_per_source(const CandidatePool& pool, const std::string& preferred, std::size_t preferred_cap,
                             std::size_t other_cap);

/// cap_per_source guarded by the adaptive rule: the pool is returned
/// unchanged when there is no preferred source or either cap is zero.
CandidatePool apply_adaptive_cap(const CandidatePool& pool, const std::optional<std::string>& preferred,
                                 std::size_t preferred_cap, std::size_t other_cap);

/// Global sort by raw retrieval score.
EvidenceSet select_score(const CandidatePool& pool, std::size_t keep_k);

/// Reciprocal rank fusion: 1 / (rrf_constant + source_rank), summed over
/// candidates that share a document id. The first occurrence in pool order
/// represents a merged document.
EvidenceSet select_rrf(const CandidatePool& pool, std::size_t keep_k, double rrf_constant);

/// Grades each candidate 0-10 with the judge prompt and ranks by
/// grade/10 * min-max normalised raw score. Candidates whose grade cannot be
/// obtained fall back to the normalised score alone.
EvidenceSet select_judge(const CandidatePool& pool, std::string_view query, std::size_t keep_k, LlmClient& llm);

/// First integer in `reply`, clamped to 0..10 and mapped to [0, 1].
std::optional<double> parse_judge_grade(std::string_view reply);

/// Min-max normalised raw scores; all 1.0 when every score is equal.
std::vector<double> normalized_scores(const CandidatePool& pool);

/// Caps the pool according to `budget` and runs its selector. `llm` is only
/// used by the judge selector and may be null otherwise.
EvidenceSet select_evidence(const CandidatePool& pool, const BudgetConfig& budget,
                            const std::optional<std::string>& preferred, std::string_view query, LlmClient* llm);

}  // namespace msrag
