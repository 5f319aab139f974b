#include <doctest.h>

#include "msrag/planner.hpp"

using namespace msrag;

TEST_SUITE("planner") {
  TEST_CASE("identity plan") {
    auto plan = identity_plan("Who directed Inception?");
    REQUIRE(plan.subqueries.size() == 1);
    CHECK(plan.subqueries[0].index == 1);
    CHECK(plan.subqueries[0].template_text == "Who directed Inception?");
    CHECK(plan.subqueries[0].depends_on.empty());
    CHECK(is_valid_plan(plan));
  }

  TEST_CASE("two-step plan with a dependency") {
    auto plan = parse_plan("1 | - | Who directed X?\n2 | 1 | When was {ans:1} born?\n");
    REQUIRE(plan.has_value());
    REQUIRE(plan->subqueries.size() == 2);
    CHECK(plan->subqueries[1].depends_on == std::set<std::size_t>{1});
    CHECK(plan->subqueries[1].template_text == "When was {ans:1} born?");
  }

  TEST_CASE("lenient parsing: prose lines, list markers, missing dependency declarations") {
    auto plan = parse_plan("Here is the plan:\n1. | none | Who wrote Y?\n 2) | | Where did {ans:1} live?\nThanks");
    REQUIRE(plan.has_value());
    CHECK(plan->subqueries.size() == 2);
    CHECK(plan->subqueries[1].depends_on == std::set<std::size_t>{1});
  }

  TEST_CASE("rejected plans") {
    CHECK_FALSE(parse_plan("no plan here").has_value());
    CHECK_FALSE(parse_plan("2 | - | starts at two").has_value());
    CHECK_FALSE(parse_plan("1 | 1 | depends on itself").has_value());
    CHECK_FALSE(parse_plan("1 | - | refers to {ans:2}").has_value());
    CHECK_FALSE(parse_plan("1 | - | a\n2 | 3 | forward").has_value());
  }

  TEST_CASE("decompose parses the LLM plan") {
    ScriptedLlm llm;
    llm.on("decomposition assistant", "1 | - | Who directed X?\n2 | 1 | When was {ans:1} born?");
    auto plan = decompose("When was the director of X born?", llm);
    CHECK(plan.subqueries.size() == 2);
    CHECK_FALSE(plan.fallback_reason.has_value());
  }

  TEST_CASE("one reformat retry, then identity fallback") {
    ScriptedLlm recovers;
    recovers.on("could not be parsed", "1 | - | fixed").on("decomposition assistant", "garbage");
    auto plan = decompose("q", recovers);
    CHECK(plan.subqueries[0].template_text == "fixed");
    CHECK(recovers.calls().size() == 2);
    CHECK(recovers.calls()[1].user.find("PREVIOUS OUTPUT:\ngarbage") != std::string::npos);

    ScriptedLlm broken;
    broken.on("", "still garbage");
    auto fallback = decompose("the question", broken);
    CHECK(broken.calls().size() == 2);
    REQUIRE(fallback.subqueries.size() == 1);
    CHECK(fallback.subqueries[0].template_text == "the question");
    CHECK(fallback.fallback_reason.has_value());

    ScriptedLlm down;
    down.fail_on("", "offline");
    auto offline = decompose("q", down);
    CHECK(offline.subqueries.size() == 1);
    CHECK(offline.fallback_reason->find("offline") != std::string::npos);
  }

  TEST_CASE("substitute_variables") {
    CHECK(substitute_variables("plain text {x} {ans:}", {}) == "plain text {x} {ans:}");
    CHECK(substitute_variables("When was {ans:1} born?", {{1, "Christopher Nolan"}}) == "When was Christopher Nolan born?");
    CHECK(substitute_variables("{ans:1}-{ans:2}-{ans:1}", {{1, "a"}, {2, "b"}}) == "a-b-a");
    try {
      substitute_variables("{ans:2}", {{1, "x"}});
      FAIL("no error");
    } catch (const PlanError& e) {
      CHECK(std::string(e.what()) == "unresolved placeholder 2");
    }
  }

  TEST_CASE("substitution is idempotent on its output") {
    const AnswerEnvironment env{{1, "Paris"}, {2, "{ans:9}"}};
    auto once = substitute_variables("{ans:1} and {ans:2}", env);
    CHECK(once == "Paris and {ans:9}");
    CHECK(placeholders("{ans:1} {ans:12} {ans:x}") == std::set<std::size_t>{1, 12});
  }
}
