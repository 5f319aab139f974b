#include <doctest.h>

#include <httplib.h>

#include <chrono>
#include <nlohmann/json.hpp>
#include <thread>

#include "msrag/service.hpp"
#include "test_support.hpp"

using namespace msrag;
using namespace msrag::testing;
using nlohmann::json;

namespace {

SourceRegistry base_registry() {
  SourceRegistry r;
  r.add({"wiki", "encyclopedia", 2},
        std::make_shared<FixedRetriever>(std::vector<Hit>{{doc("w1", "wiki", "Paris is the capital of France."), 2.0},
                                                          {doc("w2", "wiki", "Rome is in Italy."), 1.0}}));
  return r;
}

std::shared_ptr<ScriptedLlm> stub() {
  auto llm = std::make_shared<ScriptedLlm>();
  llm->on("EVIDENCE:", "ANSWER: Paris\nSUFFICIENT: yes");
  return llm;
}

/// Service on an ephemeral port, served from a background thread.
class Running {
 public:
  explicit Running(const std::filesystem::path& data_dir, std::shared_ptr<LlmClient> llm = stub(),
                   std::vector<Preset> presets = {}) {
    ServiceOptions options;
    options.presets = std::move(presets);
    options.data_dir = data_dir;
    options.defaults.decompose = false;
    service_ = std::make_unique<Service>(base_registry(), std::move(llm), options);
    port_ = service_->bind_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { service_->run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(10, 0);
  }
  ~Running() {
    service_->stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }
  int port() const { return port_; }

  json wait_done(const std::string& id) {
    for (int i = 0; i < 500; ++i) {
      auto res = client_->Get("/runs/" + id);
      REQUIRE(res);
      auto j = json::parse(res->body);
      if (j.at("state") == "done" || j.at("state") == "failed") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    FAIL("run did not finish");
    return {};
  }

 private:
  std::unique_ptr<Service> service_;
  int port_ = -1;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

const json kQueries = json::array({{{"id", "q1"}, {"question", "Capital of France?"}, {"answers", {"Paris"}}},
                                   {{"id", "q2"}, {"question", "Capital of Italy?"}, {"answers", {"Rome"}}}});

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("health and source listing") {
    TempDir dir;
    Running s(dir.path());
    auto health = s.client().Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    auto sources = json::parse(s.client().Get("/sources")->body);
    REQUIRE(sources.at("sources").size() == 1);
    CHECK(sources["sources"][0] == json{{"name", "wiki"}, {"profile", "encyclopedia"}, {"document_count", 2}});
  }

  TEST_CASE("source upload: success and validation errors") {
    TempDir dir;
    Running s(dir.path());
    const std::string corpus = R"([{"id": "n1", "text": "Berlin is in Germany."}])";

    httplib::MultipartFormDataItems ok{{"file", corpus, "news.json", "application/json"},
                                       {"name", "news", "", ""},
                                       {"profile", "current events", "", ""}};
    auto res = s.client().Post("/sources", ok);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body) == json{{"name", "news"}, {"profile", "current events"}, {"document_count", 1}});
    CHECK(json::parse(s.client().Get("/sources")->body).at("sources").size() == 2);
    CHECK(std::filesystem::exists(dir / "sources.json"));

    auto dup = s.client().Post("/sources", ok);
    CHECK(dup->status == 400);
    CHECK(json::parse(dup->body).at("error") == "duplicate source");

    httplib::MultipartFormDataItems no_name{{"file", corpus, "x.json", "application/json"}, {"profile", "p", "", ""}};
    auto missing = s.client().Post("/sources", no_name);
    CHECK(missing->status == 400);
    CHECK(json::parse(missing->body).at("field") == "name");

    httplib::MultipartFormDataItems bad{{"file", R"([{"id": "x1"}])", "bad.json", "application/json"},
                                        {"name", "bad", "", ""},
                                        {"profile", "p", "", ""}};
    auto invalid = s.client().Post("/sources", bad);
    CHECK(invalid->status == 400);
    auto body = json::parse(invalid->body);
    CHECK(body.at("message").get<std::string>().find("text") != std::string::npos);
    CHECK(json::parse(s.client().Get("/sources")->body).at("sources").size() == 2);

    httplib::MultipartFormDataItems csv{{"file", "id,title\nc1,Heading\n", "c.csv", "text/csv"},
                                        {"name", "tabular", "", ""},
                                        {"profile", "p", "", ""}};
    auto no_text = s.client().Post("/sources", csv);
    CHECK(no_text->status == 400);
    CHECK(json::parse(no_text->body).at("message").get<std::string>().find("text") != std::string::npos);
  }

  TEST_CASE("a preset naming an unregistered source is rejected") {
    TempDir dir;
    Preset preset{"broken", "", {{"wiki", "p", "wiki.json"}, {"ghost", "p", "ghost.json"}}, std::nullopt};
    Running s(dir.path(), stub(), {preset});
    CHECK(json::parse(s.client().Get("/presets")->body).dump().find("broken") != std::string::npos);
    auto res = s.client().Post("/runs", json{{"preset", "broken"}, {"queries", kQueries}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    auto fields = json::parse(res->body).at("fields");
    REQUIRE(fields.size() == 1);
    CHECK(fields[0].at("field") == "preset");
    CHECK(fields[0].at("message") == "unknown source 'ghost'");
  }

  TEST_CASE("records show reflection attempts") {
    TempDir dir;
    auto llm = std::make_shared<ScriptedLlm>();
    llm->enqueue("EVIDENCE:", "ANSWER: ?\nSUFFICIENT: no").on("EVIDENCE:", "ANSWER: Paris\nSUFFICIENT: yes");
    Running s(dir.path(), llm);
    json request{{"queries", json::array({kQueries[0]})}};
    auto res = s.client().Post("/runs", request.dump(), "application/json");
    const auto id = json::parse(res->body).at("id").get<std::string>();
    CHECK(s.wait_done(id).at("state") == "done");
    auto trace = json::parse(s.client().Get("/runs/" + id + "/trace/q1")->body);
    const auto& sub = trace.at("records")[0].at("subqueries")[0];
    CHECK(sub.at("attempts") == 2);
    CHECK(sub.at("trace").size() == 2);
    CHECK(trace.at("records")[0].at("final_answer") == "Paris");
  }

  TEST_CASE("run lifecycle, report and trace") {
    TempDir dir;
    std::string report_text;
    {
      Running s(dir.path());
      json request{{"queries", kQueries}, {"compare", true}, {"keep_k", 2}};
      auto res = s.client().Post("/runs", request.dump(), "application/json");
      REQUIRE(res);
      CHECK(res->status == 202);
      auto accepted = json::parse(res->body);
      const auto id = accepted.at("id").get<std::string>();
      CHECK(accepted.at("progress").at("total") == 4);

      auto done = s.wait_done(id);
      CHECK(done.at("state") == "done");
      CHECK(done.at("progress").at("completed") == 4);
      CHECK(done.at("arms") == json::array({"Hard Routing", "Adaptive Cap"}));
      const auto& report = done.at("report");
      CHECK(report.at("arms")[1].at("aggregates").at("em") == 0.5);
      CHECK(report.at("arms")[0].at("config").at("keep_k") == 2);
      report_text = report.dump();

      auto trace = json::parse(s.client().Get("/runs/" + id + "/trace/q2")->body);
      CHECK(trace.at("query_id") == "q2");
      REQUIRE(trace.at("records").size() == 2);
      CHECK(trace["records"][0].at("arm") == "Hard Routing");
      CHECK(trace["records"][1].at("final_answer") == "Paris");

      auto one = s.client().Get("/runs/" + id + "/trace/q1?arm=Adaptive%20Cap");
      REQUIRE(one->status == 200);
      CHECK(json::parse(one->body).at("em") == 1);

      CHECK(s.client().Get("/runs/" + id + "/trace/nope")->status == 404);
      CHECK(s.client().Get("/runs/run-999999")->status == 404);
    }
    // A fresh service reads the finished run back from disk unchanged.
    Running again(dir.path());
    auto state = json::parse(again.client().Get("/runs/run-000001")->body);
    CHECK(state.at("state") == "done");
    CHECK(state.at("report").dump() == report_text);
  }

  TEST_CASE("invalid run configurations are rejected per field") {
    TempDir dir;
    Running s(dir.path());
    json request{{"queries", kQueries},
                 {"keep_k", 0},
                 {"sources", {"wiki", "ghost"}},
                 {"sample_size", 9},
                 {"arms", json::array({json{{"selector", "best"}}})}};
    auto res = s.client().Post("/runs", request.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    auto body = json::parse(res->body);
    CHECK(body.at("error") == "invalid run configuration");
    std::set<std::string> fields;
    for (const auto& f : body.at("fields")) fields.insert(f.at("field").get<std::string>());
    for (const char* f : {"keep_k", "sources", "sample_size", "arms[0].selector"}) CHECK_MESSAGE(fields.count(f) == 1, f);

    CHECK(s.client().Post("/runs", "not json", "application/json")->status == 400);
    auto no_queries = s.client().Post("/runs", "{}", "application/json");
    CHECK(no_queries->status == 422);
  }

  TEST_CASE("pipeline failures mark queries as faults, not the run") {
    TempDir dir;
    auto llm = std::make_shared<ScriptedLlm>();
    llm->fail_on("EVIDENCE:", "backend down");
    Running s(dir.path(), llm);
    auto res = s.client().Post("/runs", json{{"queries", kQueries}}.dump(), "application/json");
    auto done = s.wait_done(json::parse(res->body).at("id").get<std::string>());
    CHECK(done.at("state") == "done");
    CHECK(done.at("report").at("arms")[0].at("aggregates").at("em") == 0.0);
  }

  TEST_CASE("an occupied port cannot be bound twice") {
    TempDir dir;
    Running s(dir.path());
    Service other(base_registry(), stub(), ServiceOptions{dir.path() / "other"});
    CHECK_FALSE(other.bind("127.0.0.1", s.port()));
  }
}
