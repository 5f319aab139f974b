#include <doctest.h>

#include "msrag/generation.hpp"
#include "test_support.hpp"

using namespace msrag;
using namespace msrag::testing;

namespace {

std::shared_ptr<const Retriever> fixed(const std::string& source, std::vector<std::string> ids) {
  std::vector<Hit> hits;
  double score = static_cast<double>(ids.size());
  for (auto& id : ids) hits.push_back({doc(id, source, source + " passage " + id), score--});
  return std::make_shared<FixedRetriever>(std::move(hits));
}

SourceRegistry two_sources() {
  SourceRegistry r;
  r.add({"wiki", "encyclopedia", 3}, fixed("wiki", {"w1", "w2", "w3"}));
  r.add({"sciq", "science", 3}, fixed("sciq", {"s1", "s2", "s3"}));
  return r;
}

constexpr const char* kSynthesis = "using only the evidence below";

}  // namespace

TEST_SUITE("generation") {
  TEST_CASE("reply parsing") {
    auto g = parse_generation_reply("ANSWER: Paris\nREASONING: doc 1 states it\nSUFFICIENT: yes");
    CHECK(g.answer == "Paris");
    CHECK(g.reasoning == "doc 1 states it");
    CHECK(g.sufficient);
    CHECK(g.notes.empty());

    auto no = parse_generation_reply("ANSWER:\nREASONING: nothing relevant\nSUFFICIENT: no");
    CHECK(no.answer.empty());
    CHECK_FALSE(no.sufficient);

    auto loose = parse_generation_reply("answer: **Rome**\nsufficient: maybe");
    CHECK(loose.sufficient);
    CHECK(loose.notes.size() == 1);

    auto bare = parse_generation_reply("  just text  ");
    CHECK(bare.answer == "just text");
    CHECK(bare.sufficient);
    CHECK(bare.notes.size() == 2);
  }

  TEST_CASE("synthesis prompt lists evidence with source labels") {
    EvidenceSet e;
    auto d = doc("x", "wiki", "Paris is in France.");
    d.title = "Paris";
    e.items.push_back({{d, 1.0, "wiki", 1}, 1.0});
    auto prompt = render_synthesis_prompt("Where is Paris?", e);
    CHECK(prompt.find("[1] (source: wiki) Paris: Paris is in France.") != std::string::npos);
    CHECK(prompt.find("Where is Paris?") != std::string::npos);
    CHECK(render_synthesis_prompt("q", EvidenceSet{}).find("(no evidence retrieved)") != std::string::npos);
  }

  TEST_CASE("generate_answer: insufficiency and transport errors") {
    ScriptedLlm llm;
    llm.on(kSynthesis, "ANSWER: \nREASONING: none\nSUFFICIENT: no");
    CHECK_FALSE(generate_answer("q", EvidenceSet{}, llm).sufficient);

    ScriptedLlm down;
    down.fail_on(kSynthesis, "socket closed");
    auto g = generate_answer("q", EvidenceSet{}, down);
    CHECK_FALSE(g.sufficient);
    CHECK(g.answer.empty());
    REQUIRE(g.error.has_value());
  }

  TEST_CASE("reflection disabled: one attempt, fallback result") {
    auto registry = two_sources();
    ScriptedLlm llm;
    llm.on("routing assistant", "wiki").on(kSynthesis, "ANSWER: guess\nSUFFICIENT: no");
    PipelineConfig config;
    config.use_reflection = false;
    auto r = run_subquery({1, "q", {}}, {}, registry, config, llm);
    CHECK(r.attempts == 1);
    CHECK(r.fallback);
    CHECK(r.answer == "guess");
    CHECK(llm.call_count(kSynthesis) == 1);
  }

  TEST_CASE("insufficient, insufficient, sufficient: three attempts") {
    auto registry = two_sources();
    ScriptedLlm llm;
    llm.on("routing assistant", "wiki")
        .enqueue(kSynthesis, "ANSWER: a1\nSUFFICIENT: no")
        .enqueue(kSynthesis, "ANSWER: a2\nSUFFICIENT: no")
        .enqueue(kSynthesis, "ANSWER: final\nSUFFICIENT: yes");
    PipelineConfig config;
    auto r = run_subquery({1, "q", {}}, {}, registry, config, llm);
    CHECK(r.attempts == 3);
    CHECK(r.answer == "final");
    CHECK(r.sufficient);
    CHECK_FALSE(r.fallback);
    CHECK(r.trace.size() == 3);
    CHECK(r.fail_history.entries().size() == 2);
  }

  TEST_CASE("retry routing prompt carries the failed source") {
    auto registry = two_sources();
    ScriptedLlm llm;
    llm.enqueue("routing assistant", "sciq").on("routing assistant", "wiki");
    llm.enqueue(kSynthesis, "ANSWER: x\nSUFFICIENT: no").on(kSynthesis, "ANSWER: y\nSUFFICIENT: yes");
    auto r = run_subquery({1, "q", {}}, {}, registry, PipelineConfig{}, llm);
    CHECK(r.attempts == 2);
    std::vector<std::string> routing_prompts;
    for (const auto& c : llm.calls()) {
      if (c.user.find("routing assistant") != std::string::npos) routing_prompts.push_back(c.user);
    }
    REQUIRE(routing_prompts.size() == 2);
    CHECK(routing_prompts[0].find("Previously failed sources") == std::string::npos);
    CHECK(routing_prompts[1].find("Previously failed sources for this query: sciq") != std::string::npos);
  }

  TEST_CASE("fail history only grows and attempts stay bounded") {
    auto registry = two_sources();
    for (int max : {0, 1, 2, 4}) {
      ScriptedLlm llm;
      llm.enqueue("routing assistant", "wiki").enqueue("routing assistant", "sciq").on("routing assistant", "wiki");
      llm.on(kSynthesis, "ANSWER: none\nSUFFICIENT: no");
      PipelineConfig config;
      config.max_reflexion_times = max;
      auto r = run_subquery({1, "q", {}}, {}, registry, config, llm);
      CHECK(r.attempts == max + 1);
      CHECK(llm.call_count(kSynthesis) == static_cast<std::size_t>(max + 1));
      CHECK(r.fail_history.entries().size() == static_cast<std::size_t>(max));
      for (std::size_t i = 1; i < r.fail_history.entries().size(); ++i) {
        CHECK(r.fail_history.entries()[i].attempt > r.fail_history.entries()[i - 1].attempt);
      }
      for (const auto& t : r.trace) CHECK(t.evidence.items.size() <= config.budget.keep_k);
    }
  }

  TEST_CASE("answers of earlier steps are bound into later templates") {
    auto registry = two_sources();
    ScriptedLlm llm;
    llm.on("routing assistant", "wiki").on(kSynthesis, "ANSWER: ok\nSUFFICIENT: yes");
    auto r = run_subquery({2, "When was {ans:1} born?", {1}}, {{1, "Nolan"}}, registry, PipelineConfig{}, llm);
    CHECK(r.bound_query == "When was Nolan born?");
    CHECK(llm.calls().back().user.find("When was Nolan born?") != std::string::npos);
  }

  TEST_CASE("fusion") {
    ScriptedLlm llm;
    SubqueryResult a;
    a.answer = "42";
    auto single = fuse_answers("q", {a}, llm);
    CHECK(single.answer == "42");
    CHECK(llm.calls().empty());

    SubqueryResult b;
    b.index = 2;
    b.answer = "43";
    llm.on("SUB-QUESTION ANSWERS", "  forty-three ");
    CHECK(fuse_answers("q", {a, b}, llm).answer == "forty-three");

    ScriptedLlm down;
    down.fail_on("SUB-QUESTION ANSWERS", "boom");
    auto failed = fuse_answers("q", {a, b}, down);
    CHECK(failed.answer == "43");
    CHECK(failed.fallback);
    CHECK(failed.error.has_value());
  }
}
