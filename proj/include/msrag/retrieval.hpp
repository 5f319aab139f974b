#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/corpus.hpp"

namespace msrag {

/// A retrieved document annotated with where it came from.
struct ScoredCandidate {
  Document document;
  double score = 0.0;
  std::string source;
  std::size_t source_rank = 0;  // 1-based within its source's result list
};

struct SourceFailure {
  std::string source;
  std::string message;
};

/// Unified candidate pool. Candidates are grouped by source in registry
/// order, each group in rank order.
struct CandidatePool {
  std::vector<ScoredCandidate> candidates;
  std::map<std::string, std::size_t> per_source_counts;
  /// Every source consulted, in registry order (including ones that returned nothing).
  std::vector<std::string> source_order;
  std::vector<SourceFailure> failures;

  /// Position of `source` in source_order; source_order.size() when absent.
  std::size_t source_position(std::string_view source) const;
};

enum class FanOut { parallel, sequential };

/// Queries every registered source for its top `k_per_source` hits and merges
/// them. A source whose retriever throws contributes nothing and is listed in
/// `failures`.
CandidatePool retrieve_multi_source(std::string_view query, const SourceRegistry& registry, std::size_t k_per_source,
                                    FanOut fan_out = FanOut::parallel);

}  // namespace msrag
