#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msrag/corpus.hpp"
#include "msrag/llm.hpp"

namespace msrag {

struct BudgetConfig;

struct RoutingDecision {
  std::optional<std::string> preferred_source;
  std::string raw_reply;
  int attempt = 1;
  /// Transport or backend error, when the LLM call failed.
  std::optional<std::string> error;
};

/// Routing preferences that already led to insufficient evidence.
class FailHistory {
 public:
  struct Entry {
    std::string subquery;
    std::string failed_source;
    int attempt = 0;
  };

  void record(std::string subquery, std::string failed_source, int attempt);
  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  /// Distinct failed sources in first-failure order.
  std::vector<std::string> failed_sources() const;
  /// "Previously failed sources for this query: a, b", or "" when empty.
  std::string render() const;

 private:
  std::vector<Entry> entries_;
};

std::string render_routing_prompt(std::string_view query, const std::vector<SourceProfile>& profiles,
                                  const FailHistory& history);

/// Maps a free-text reply onto a registered name: exact (trimmed,
/// case-insensitive) match first, else the unique name contained in the
/// reply, else nothing.
std::optional<std::string> match_source(std::string_view reply, const std::vector<std::string>& names);

/// Asks the LLM for the preferred source. Never throws: LLM failures and
/// unmatched replies yield preferred_source = nullopt. With a single profile
/// that profile is returned without an LLM call.
RoutingDecision route(std::string_view query, const std::vector<SourceProfile>& profiles, const FailHistory& history,
                      LlmClient& llm, int attempt = 1);

/// True when the budget needs a preferred source.
bool should_route(const BudgetConfig& budget);

}  // namespace msrag
