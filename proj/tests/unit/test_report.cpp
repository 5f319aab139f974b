#include <doctest.h>

#include "msrag/report.hpp"
#include "test_support.hpp"

using namespace msrag;
using namespace msrag::testing;
using nlohmann::json;

namespace {

ComparisonReport small_report() {
  SourceRegistry registry;
  registry.add({"wiki", "encyclopedia", 2},
               std::make_shared<FixedRetriever>(std::vector<Hit>{{doc("w1", "wiki", "alpha"), 2.0}, {doc("w2", "wiki", "beta"), 1.0}}));
  ScriptedLlm llm;
  llm.on("EVIDENCE:", "ANSWER: alpha\nREASONING: [1]\nSUFFICIENT: yes");
  PipelineConfig base;
  base.decompose = false;
  EvalConfig config;
  config.arms = {hard_routing_arm(base), adaptive_cap_arm(base)};
  std::vector<QueryItem> data{{"q1", "what?", {"alpha"}, {}}, {"q2", "which?", {"beta"}, {}}};
  return run_comparison(config, data, registry, llm);
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("pipeline config round trip") {
    PipelineConfig c;
    c.budget.keep_k = 7;
    c.budget.selector = Selector::rrf;
    c.budget.mode = RoutingMode::hard;
    c.use_reflection = false;
    std::vector<FieldError> errors;
    auto back = pipeline_from_json(to_json(c), PipelineConfig{}, errors);
    CHECK(errors.empty());
    CHECK(to_json(back) == to_json(c));
    CHECK(to_json(c).at("top_k_per_source") == 5);
  }

  TEST_CASE("invalid overrides are reported per field with the prefix") {
    std::vector<FieldError> errors;
    pipeline_from_json(json{{"selector", "best"}, {"decompose", "maybe"}, {"other_cap", -1}},
                       PipelineConfig{}, errors, "arms[1].");
    std::set<std::string> fields;
    for (const auto& e : errors) fields.insert(e.field);
    CHECK(fields.count("arms[1].selector") == 1);
    CHECK(fields.count("arms[1].decompose") == 1);
    CHECK(fields.count("arms[1].other_cap") == 1);

    // Budget invariants are checked once the individual fields parse.
    errors.clear();
    pipeline_from_json(json{{"keep_k", 0}}, PipelineConfig{}, errors, "arms[1].");
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].field == "arms[1].keep_k");
  }

  TEST_CASE("report layout") {
    auto report = small_report();
    auto j = to_json(report, false);
    CHECK(j.at("dataset_size") == 2);
    CHECK(j.at("sampled_indices") == json::array({0, 1}));
    REQUIRE(j.at("arms").size() == 2);
    const auto& arm = j.at("arms")[0];
    CHECK(arm.at("name") == "Hard Routing");
    CHECK(arm.at("config").at("mode") == "hard");
    CHECK(arm.at("aggregates").at("em") == 0.5);
    CHECK_FALSE(arm.at("aggregates").contains("avg_latency_ms"));
    const auto& record = arm.at("records")[0];
    for (const char* key : {"query_id", "question", "gold_answers", "final_answer", "em", "f1", "prompt_tokens", "plan",
                            "subqueries", "llm_calls"}) {
      CHECK_MESSAGE(record.contains(key), key);
    }
    CHECK_FALSE(record.contains("wall_ms"));
    const auto& sub = record.at("subqueries")[0];
    CHECK(sub.at("trace")[0].at("evidence").at("items")[0].at("id") == "w1");

    auto timed = to_json(report, true);
    CHECK(timed.at("arms")[0].at("aggregates").contains("avg_latency_ms"));
    CHECK(timed.at("arms")[0].at("records")[0].contains("wall_ms"));
  }

  TEST_CASE("untimed reports are reproducible") {
    CHECK(to_json(small_report(), false).dump() == to_json(small_report(), false).dump());
  }

  TEST_CASE("table") {
    auto table = render_table(small_report());
    std::istringstream in(table);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0].rfind("Method", 0) == 0);
    CHECK(lines[0].find("EM") != std::string::npos);
    CHECK(lines[0].find("F1") != std::string::npos);
    CHECK(lines[0].find("Avg Tokens") != std::string::npos);
    CHECK(lines[1].find_first_not_of('-') == std::string::npos);
    CHECK(lines[2].rfind("Hard Routing", 0) == 0);
    CHECK(lines[2].find("50.00") != std::string::npos);
    CHECK(lines[3].rfind("Adaptive Cap", 0) == 0);
    for (const auto& l : lines) CHECK(l.size() == lines[0].size());
  }
}
