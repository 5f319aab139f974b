#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msrag/corpus.hpp"

namespace msrag {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// In-memory inverted index scored with Okapi BM25.
///
/// Terms come from text::simple_tokens over title and body. Each distinct
/// query term contributes
///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))
/// with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays positive.
/// Documents matching no query term are still returned (score 0) so a lookup
/// with k >= N yields the whole corpus.
class Bm25Index final : public Retriever {
 public:
  explicit Bm25Index(std::vector<Document> documents, Bm25Params params = {});

  std::vector<Hit> lookup(std::string_view query, std::size_t k) const override;
  std::size_t size() const override { return documents_.size(); }

  const Bm25Params& params() const { return params_; }

 private:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };

  Bm25Params params_;
  std::vector<Document> documents_;
  std::vector<std::uint32_t> lengths_;
  double avg_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

}  // namespace msrag
