#include "msrag/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "msrag/text.hpp"

namespace msrag {

namespace {

std::vector<std::string> document_terms(const Document& doc) {
  auto terms = text::simple_tokens(doc.text);
  if (doc.title) {
    auto title_terms = text::simple_tokens(*doc.title);
    terms.insert(terms.end(), title_terms.begin(), title_terms.end());
  }
  return terms;
}

}  // namespace

Bm25Index::Bm25Index(std::vector<Document> documents, Bm25Params params)
    : params_(params), documents_(std::move(documents)) {
  lengths_.reserve(documents_.size());
  std::uint64_t total = 0;
  for (std::uint32_t d = 0; d < documents_.size(); ++d) {
    auto terms = document_terms(documents_[d]);
    lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    total += terms.size();
    std::sort(terms.begin(), terms.end());
    for (std::size_t i = 0; i < terms.size();) {
      std::size_t j = i;
      while (j < terms.size() && terms[j] == terms[i]) ++j;
      postings_[terms[i]].push_back({d, static_cast<std::uint32_t>(j - i)});
      i = j;
    }
  }
  avg_length_ = documents_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(documents_.size());
}

std::vector<Hit> Bm25Index::lookup(std::string_view query, std::size_t k) const {
  const auto n = static_cast<double>(documents_.size());
  std::vector<double> scores(documents_.size(), 0.0);

  auto tokens = text::simple_tokens(query);
  std::set<std::string> unique_terms(tokens.begin(), tokens.end());
  for (const auto& term : unique_terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = avg_length_ > 0.0 ? lengths_[p.doc] / avg_length_ : 0.0;
      scores[p.doc] += idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }
  }

  std::vector<std::uint32_t> order(documents_.size());
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return documents_[a].id < documents_[b].id;
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);

  std::vector<Hit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) hits.push_back({documents_[order[i]], scores[order[i]]});
  return hits;
}

}  // namespace msrag
