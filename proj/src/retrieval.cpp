#include "msrag/retrieval.hpp"

#include <algorithm>
#include <future>
#include <stdexcept>

namespace msrag {

namespace {

struct SourceResult {
  std::vector<Hit> hits;
  std::string error;
};

SourceResult query_source(const SourceRegistry::Entry& entry, std::string_view query, std::size_t k) {
  SourceResult result;
  try {
    if (!entry.retriever) throw std::runtime_error("source has no index");
    result.hits = entry.retriever->lookup(query, k);
    if (result.hits.size() > k) result.hits.resize(k);
  } catch (const std::exception& e) {
    result.hits.clear();
    result.error = e.what();
  }
  return result;
}

}  // namespace

std::size_t CandidatePool::source_position(std::string_view source) const {
  auto it = std::find(source_order.begin(), source_order.end(), source);
  return static_cast<std::size_t>(it - source_order.begin());
}

CandidatePool retrieve_multi_source(std::string_view query, const SourceRegistry& registry, std::size_t k_per_source,
                                    FanOut fan_out) {
  if (registry.empty()) throw std::invalid_argument("retrieve_multi_source: registry is empty");
  if (k_per_source == 0) throw std::invalid_argument("retrieve_multi_source: k_per_source must be >= 1");

  const auto& entries = registry.entries();
  std::vector<SourceResult> results(entries.size());
  if (fan_out == FanOut::parallel && entries.size() > 1) {
    std::vector<std::future<SourceResult>> tasks;
    tasks.reserve(entries.size());
    for (const auto& entry : entries) {
      tasks.push_back(std::async(std::launch::async, query_source, std::cref(entry), query, k_per_source));
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) results[i] = tasks[i].get();
  } else {
    for (std::size_t i = 0; i < entries.size(); ++i) results[i] = query_source(entries[i], query, k_per_source);
  }

  CandidatePool pool;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& name = entries[i].profile.name;
    pool.source_order.push_back(name);
    pool.per_source_counts[name] = results[i].hits.size();
    if (!results[i].error.empty()) pool.failures.push_back({name, results[i].error});
    std::size_t rank = 0;
    for (auto& hit : results[i].hits) {
      ScoredCandidate c;
      c.document = std::move(hit.document);
      c.document.source = name;
      c.score = hit.score;
      c.source = name;
      c.source_rank = ++rank;
      pool.candidates.push_back(std::move(c));
    }
  }
  return pool;
}

}  // namespace msrag
