#include <doctest.h>

#include <random>

#include "msrag/bm25.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace msrag;
using namespace msrag::testing;

namespace {

std::vector<oracle::Bm25Doc> oracle_docs(const std::vector<Document>& docs) {
  std::vector<oracle::Bm25Doc> out;
  for (const auto& d : docs) out.push_back({d.id, d.title.value_or("") + " " + d.text});
  return out;
}

void check_against_oracle(const std::vector<Document>& docs, const std::string& query, std::size_t k) {
  Bm25Index index(docs);
  auto hits = index.lookup(query, k);
  auto expected = oracle::bm25_rank(oracle_docs(docs), query);
  REQUIRE(hits.size() == std::min(k, docs.size()));
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].document.id == expected[i].first);
    CHECK(hits[i].score == doctest::Approx(expected[i].second).epsilon(1e-9));
  }
}

}  // namespace

TEST_SUITE("bm25") {
  TEST_CASE("single document is rank 1 for its own text") {
    Bm25Index index({doc("only", "s", "lonely document")});
    auto hits = index.lookup("lonely document", 3);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].document.id == "only");
  }

  TEST_CASE("term containment dominates") {
    Bm25Index index({doc("2", "s", "dogs bark"), doc("1", "s", "cats purr")});
    auto hits = index.lookup("cats", 2);
    CHECK(hits[0].document.text == "cats purr");
    CHECK(hits[0].score > hits[1].score);
    CHECK(hits[1].score == 0.0);
  }

  TEST_CASE("k beyond corpus size returns the whole corpus") {
    Bm25Index index({doc("a", "s", "x"), doc("b", "s", "y"), doc("c", "s", "z")});
    CHECK(index.lookup("nothing matches", 10).size() == 3);
    CHECK(index.lookup("x", 0).empty());
  }

  TEST_CASE("equal scores break ties by ascending id") {
    Bm25Index index({doc("b", "s", "same words"), doc("a", "s", "same words"), doc("c", "s", "other")});
    auto hits = index.lookup("same", 3);
    CHECK(hits[0].document.id == "a");
    CHECK(hits[1].document.id == "b");
    CHECK(hits[2].document.id == "c");
  }

  TEST_CASE("five-document fixture matches the reference scorer") {
    std::vector<Document> docs{
        doc("d1", "s", "neural networks learn representations"),
        doc("d2", "s", "the neural code of the retina; neural spikes"),
        doc("d3", "s", "gradient descent for linear models"),
        doc("d4", "s", "recurrent neural nets and attention"),
        doc("d5", "s", "bayesian inference"),
    };
    docs[2].title = "Neural optimisation";
    check_against_oracle(docs, "neural", 5);
    check_against_oracle(docs, "neural", 3);
    check_against_oracle(docs, "Neural attention, retina!", 5);
  }

  TEST_CASE("randomised corpora match the reference scorer") {
    std::mt19937 rng(1234);
    const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa"};
    for (int round = 0; round < 200; ++round) {
      std::vector<Document> docs;
      const int n = 1 + static_cast<int>(rng() % 12);
      for (int i = 0; i < n; ++i) {
        std::string text;
        const int len = 1 + static_cast<int>(rng() % 9);
        for (int w = 0; w < len; ++w) text += vocab[rng() % vocab.size()] + (rng() % 4 == 0 ? ", " : " ");
        docs.push_back(doc("doc" + std::to_string(rng() % 1000) + "-" + std::to_string(i), "s", text));
      }
      std::string query;
      for (int w = 0; w < 1 + static_cast<int>(rng() % 4); ++w) query += vocab[rng() % vocab.size()] + " ";
      check_against_oracle(docs, query, 1 + rng() % 15);
    }
  }

  TEST_CASE("lookup is a prefix of the full ordering and rebuilds rank identically") {
    std::vector<Document> docs;
    for (int i = 0; i < 20; ++i) docs.push_back(doc("id" + std::to_string(i), "s", "w" + std::to_string(i % 4) + " common"));
    Bm25Index a(docs);
    Bm25Index b(docs);
    auto full = a.lookup("w1 common", 20);
    for (std::size_t k = 1; k <= 20; ++k) {
      auto part = b.lookup("w1 common", k);
      for (std::size_t i = 0; i < k; ++i) CHECK(part[i].document.id == full[i].document.id);
    }
  }

  TEST_CASE("every ingested document is retrievable by its own text") {
    std::vector<Document> docs{doc("a", "s", "red apples grow"), doc("b", "s", "green pears ripen"),
                               doc("c", "s", "yellow bananas bend")};
    Bm25Index index(docs);
    for (const auto& d : docs) CHECK(index.lookup(d.text, 1)[0].document.id == d.id);
  }
}
