#include "msrag/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "msrag/eval.hpp"
#include "msrag/report.hpp"
#include "msrag/text.hpp"

namespace msrag {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Job {
  std::string id;
  std::string state = "queued";  // queued -> running -> done | failed
  std::size_t completed = 0;
  std::size_t total = 0;
  std::optional<std::string> error;
  std::vector<std::string> arm_names;

  // Inputs, dropped once the job finishes.
  EvalConfig eval;
  std::vector<QueryItem> dataset;
  SourceRegistry registry;

  // query id -> (arm, record) in completion order
  std::map<std::string, std::vector<std::pair<std::string, json>>> traces;
  json report;
};

void write_file(const fs::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& error, json extra = json::object()) {
  extra["error"] = error;
  send_json(res, status, extra);
}

std::string corpus_error_label(CorpusError::Kind kind) {
  switch (kind) {
    case CorpusError::Kind::duplicate_source: return "duplicate source";
    case CorpusError::Kind::missing_field: return "missing field";
    case CorpusError::Kind::empty_corpus: return "empty corpus";
    case CorpusError::Kind::duplicate_id: return "duplicate id";
    case CorpusError::Kind::invalid_record: return "invalid record";
    case CorpusError::Kind::unknown_source: return "unknown source";
    case CorpusError::Kind::io: return "io error";
    case CorpusError::Kind::parse: return "parse error";
  }
  return "parse error";
}

std::string safe_file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "source" : out;
}

std::string default_arm_name(const PipelineConfig& c) {
  return c.budget.mode == RoutingMode::hard ? "Hard Routing" : "Adaptive Cap";
}

}  // namespace

struct Service::Impl {
  httplib::Server server;
  std::shared_ptr<LlmClient> llm;
  ServiceOptions options;

  std::shared_mutex registry_mutex;
  SourceRegistry registry;

  std::mutex jobs_mutex;
  std::condition_variable jobs_cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::deque<std::shared_ptr<Job>> queue;
  std::size_t next_job = 1;
  std::atomic<bool> stopping{false};
  std::vector<std::thread> workers;

  Impl(SourceRegistry r, std::shared_ptr<LlmClient> client, ServiceOptions opts)
      : llm(std::move(client)), options(std::move(opts)), registry(std::move(r)) {
    load_persisted_runs();
    routes();
    for (std::size_t i = 0; i < std::max<std::size_t>(1, options.job_concurrency); ++i) {
      workers.emplace_back([this] { work(); });
    }
  }

  ~Impl() { shutdown(); }

  void shutdown() {
    {
      std::lock_guard lock(jobs_mutex);
      if (stopping.exchange(true)) return;
    }
    jobs_cv.notify_all();
    server.stop();
    for (auto& w : workers) {
      if (w.joinable()) w.join();
    }
  }

  // ---- persistence -------------------------------------------------------

  fs::path runs_dir() const { return options.data_dir / "runs"; }
  fs::path run_dir(const std::string& id) const { return runs_dir() / id; }

  json state_json(const Job& job) const {
    json j{{"id", job.id},
           {"state", job.state},
           {"progress", {{"completed", job.completed}, {"total", job.total}}},
           {"arms", job.arm_names}};
    if (job.error) j["error"] = *job.error;
    return j;
  }

  // Caller holds jobs_mutex.
  void persist_state(const Job& job) {
    if (options.data_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(run_dir(job.id), ec);
    write_file(run_dir(job.id) / "state.json", state_json(job).dump(2) + "\n");
  }

  void load_persisted_runs() {
    if (options.data_dir.empty() || !fs::exists(runs_dir())) return;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir())) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      auto state = json::parse(read_file(dir / "state.json"), nullptr, false);
      if (state.is_discarded() || !state.is_object()) continue;
      auto job = std::make_shared<Job>();
      job->id = state.value("id", dir.filename().string());
      job->state = state.value("state", "failed");
      job->completed = state["progress"].value("completed", std::size_t{0});
      job->total = state["progress"].value("total", std::size_t{0});
      job->arm_names = state.value("arms", std::vector<std::string>{});
      if (state.contains("error")) job->error = state["error"].get<std::string>();

      std::istringstream records(read_file(dir / "records.jsonl"));
      for (std::string line; std::getline(records, line);) {
        auto r = json::parse(line, nullptr, false);
        if (r.is_discarded()) continue;
        job->traces[r["record"].value("query_id", "")].emplace_back(r.value("arm", ""), r["record"]);
      }
      if (job->state == "done") {
        job->report = json::parse(read_file(dir / "report.json"), nullptr, false);
        if (job->report.is_discarded()) {
          job->state = "failed";
          job->error = "report file unreadable";
          persist_state(*job);
        }
      } else if (job->state != "failed") {
        job->state = "failed";
        job->error = "interrupted by service restart";
        persist_state(*job);
      }
      if (auto dash = job->id.rfind('-'); dash != std::string::npos) {
        try {
          next_job = std::max(next_job, static_cast<std::size_t>(std::stoul(job->id.substr(dash + 1))) + 1);
        } catch (const std::exception&) {
        }
      }
      jobs[job->id] = job;
    }
  }

  // ---- job execution -----------------------------------------------------

  void work() {
    while (true) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(jobs_mutex);
        jobs_cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = queue.front();
        queue.pop_front();
        job->state = "running";
        persist_state(*job);
      }
      execute(*job);
    }
  }

  void execute(Job& job) {
    const auto dir = run_dir(job.id);
    job.eval.should_stop = [this] { return stopping.load(); };
    auto on_record = [&](const std::string& arm, const RunRecord& record) {
      auto record_json = to_json(record, true);
      std::lock_guard lock(jobs_mutex);
      ++job.completed;
      job.traces[record.query_id].emplace_back(arm, record_json);
      if (!options.data_dir.empty()) {
        std::ofstream out(dir / "records.jsonl", std::ios::binary | std::ios::app);
        out << json{{"arm", arm}, {"record", record_json}}.dump() << '\n';
      }
    };
    try {
      auto report = run_comparison(job.eval, job.dataset, job.registry, *llm, on_record);
      auto report_json = to_json(report, true);
      if (!options.data_dir.empty()) write_file(dir / "report.json", report_json.dump(2) + "\n");
      std::lock_guard lock(jobs_mutex);
      if (stopping) {
        job.state = "failed";
        job.error = "cancelled at shutdown";
      } else {
        job.report = std::move(report_json);
        job.state = "done";
      }
      persist_state(job);
    } catch (const std::exception& e) {
      std::lock_guard lock(jobs_mutex);
      job.state = "failed";
      job.error = e.what();
      persist_state(job);
    }
    std::lock_guard lock(jobs_mutex);
    job.dataset.clear();
    job.registry = SourceRegistry{};
  }

  // ---- handlers ----------------------------------------------------------

  void routes() {
    // httplib's default adds SO_REUSEPORT, which would let a second server share an occupied port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });
    server.Get("/sources", [this](const httplib::Request&, httplib::Response& res) { list_sources(res); });
    server.Post("/sources", [this](const httplib::Request& req, httplib::Response& res) { upload_source(req, res); });
    server.Get("/presets", [this](const httplib::Request&, httplib::Response& res) { list_presets(res); });
    server.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) { submit_run(req, res); });
    server.Get(R"(/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      get_run(req.matches[1], res);
    });
    server.Get(R"(/runs/([^/]+)/trace/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      get_trace(req.matches[1], req.matches[2], req.has_param("arm") ? req.get_param_value("arm") : std::string{}, res);
    });
    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
  }

  void list_sources(httplib::Response& res) {
    json out = json::array();
    std::shared_lock lock(registry_mutex);
    for (const auto& p : registry.profiles()) {
      out.push_back({{"name", p.name}, {"profile", p.description}, {"document_count", p.document_count}});
    }
    send_json(res, 200, {{"sources", out}});
  }

  void list_presets(httplib::Response& res) {
    json out = json::array();
    for (const auto& p : options.presets) {
      json names = json::array();
      for (const auto& s : p.sources) names.push_back(s.name);
      out.push_back({{"name", p.name}, {"description", p.description}, {"sources", names},
                     {"has_dataset", p.dataset.has_value()}});
    }
    send_json(res, 200, {{"presets", out}, {"defaults", to_json(options.defaults)}});
  }

  void upload_source(const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      send_error(res, 400, "expected multipart/form-data");
      return;
    }
    for (const char* field : {"file", "name", "profile"}) {
      if (!req.has_file(field) || text::trim(req.get_file_value(field).content).empty()) {
        send_error(res, 400, "missing field", {{"field", field}, {"message", std::string("missing form field '") + field + "'"}});
        return;
      }
    }
    const auto file = req.get_file_value("file");
    const auto name = std::string(text::trim(req.get_file_value("name").content));
    const auto profile = std::string(text::trim(req.get_file_value("profile").content));
    std::optional<CorpusFormat> format;
    if (req.has_file("format") && !text::trim(req.get_file_value("format").content).empty()) {
      format = parse_corpus_format(req.get_file_value("format").content);
      if (!format) {
        send_error(res, 400, "invalid format", {{"field", "format"}, {"message", "format must be json or csv"}});
        return;
      }
    } else {
      format = corpus_format_from_path(file.filename).value_or(CorpusFormat::json);
    }

    try {
      {
        std::shared_lock lock(registry_mutex);
        if (registry.contains(name)) {
          throw CorpusError(CorpusError::Kind::duplicate_source, "duplicate source '" + name + "'");
        }
      }
      auto docs = parse_corpus(file.content, *format, name);
      SourceProfile sp{name, profile, docs.size()};
      auto index = build_index(std::move(docs));
      {
        std::unique_lock lock(registry_mutex);
        registry.add(sp, std::move(index));
        persist_upload(name, profile, *format, file.content);
      }
      send_json(res, 200, {{"name", sp.name}, {"profile", sp.description}, {"document_count", sp.document_count}});
    } catch (const CorpusError& e) {
      json body{{"message", e.what()}};
      if (e.record()) body["record"] = *e.record();
      if (!e.field().empty()) body["field"] = e.field();
      send_error(res, 400, corpus_error_label(e.kind()), body);
    }
  }

  // Caller holds registry_mutex exclusively.
  void persist_upload(const std::string& name, const std::string& profile, CorpusFormat format,
                      const std::string& content) {
    if (options.data_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(options.data_dir / "uploads", ec);
    auto path = options.data_dir / "uploads" / (safe_file_stem(name) + (format == CorpusFormat::json ? ".json" : ".csv"));
    write_file(path, content);
    const auto manifest = options.data_dir / "sources.json";
    std::vector<SourceSpec> specs;
    if (fs::exists(manifest)) specs = load_source_manifest(manifest);
    specs.push_back({name, profile, fs::absolute(path), format});
    save_source_manifest(manifest, specs);
  }

  void submit_run(const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      send_error(res, 400, "request body must be a JSON object");
      return;
    }
    std::vector<FieldError> errors;

    // Sources and dataset.
    std::optional<std::vector<std::string>> names;
    std::optional<fs::path> dataset_path;
    std::string names_field = "sources";
    if (auto p = body.find("preset"); p != body.end()) {
      const Preset* preset = nullptr;
      if (p->is_string()) {
        for (const auto& candidate : options.presets) {
          if (candidate.name == p->get<std::string>()) preset = &candidate;
        }
      }
      if (!preset) {
        errors.push_back({"preset", "unknown preset " + p->dump()});
      } else {
        names.emplace();
        for (const auto& s : preset->sources) names->push_back(s.name);
        dataset_path = preset->dataset;
        names_field = "preset";
      }
    }
    if (auto s = body.find("sources"); s != body.end()) {
      if (!s->is_array() || !std::all_of(s->begin(), s->end(), [](const json& v) { return v.is_string(); })) {
        errors.push_back({"sources", "sources must be an array of source names"});
      } else {
        names = s->get<std::vector<std::string>>();
        names_field = "sources";
      }
    }
    SourceRegistry snapshot;
    {
      std::shared_lock lock(registry_mutex);
      if (names) {
        for (const auto& n : *names) {
          if (!registry.contains(n)) errors.push_back({names_field, "unknown source '" + n + "'"});
        }
        if (errors.empty()) snapshot = registry.subset(*names);
      } else {
        snapshot = registry;
      }
    }
    if (errors.empty() && snapshot.empty()) errors.push_back({"sources", "no sources registered"});

    std::vector<QueryItem> dataset;
    if (auto q = body.find("queries"); q != body.end()) {
      if (!q->is_array()) {
        errors.push_back({"queries", "queries must be an array"});
      } else {
        std::string jsonl;
        for (const auto& item : *q) jsonl += item.dump() + "\n";
        try {
          dataset = parse_dataset(jsonl);
        } catch (const std::exception& e) {
          errors.push_back({"queries", e.what()});
        }
      }
    } else if (dataset_path) {
      try {
        dataset = load_dataset(*dataset_path);
      } catch (const std::exception& e) {
        errors.push_back({"preset", e.what()});
      }
    }
    if (dataset.empty() && std::none_of(errors.begin(), errors.end(), [](const FieldError& e) {
          return e.field == "queries" || e.field == "preset";
        })) {
      errors.push_back({"queries", "no queries: pass queries or a preset with a dataset"});
    }

    EvalConfig eval;
    eval.concurrency = options.query_concurrency;
    if (auto s = body.find("sample_size"); s != body.end()) {
      if (!s->is_number_integer() || s->get<long long>() < 0) {
        errors.push_back({"sample_size", "sample_size must be a non-negative integer"});
      } else {
        eval.sample_size = s->get<std::size_t>();
        if (!dataset.empty() && eval.sample_size > dataset.size()) {
          errors.push_back({"sample_size", "sample_size " + std::to_string(eval.sample_size) +
                                               " exceeds dataset size " + std::to_string(dataset.size())});
        }
      }
    }

    auto base = pipeline_from_json(body, options.defaults, errors);
    if (auto a = body.find("arms"); a != body.end()) {
      if (!a->is_array() || a->empty()) {
        errors.push_back({"arms", "arms must be a non-empty array"});
      } else {
        for (std::size_t i = 0; i < a->size(); ++i) {
          const auto prefix = "arms[" + std::to_string(i) + "].";
          auto cfg = pipeline_from_json((*a)[i], base, errors, prefix);
          auto name = (*a)[i].is_object() ? (*a)[i].value("name", default_arm_name(cfg)) : default_arm_name(cfg);
          eval.arms.push_back({name, cfg});
        }
      }
    } else if (body.value("compare", false)) {
      eval.arms = {hard_routing_arm(base), adaptive_cap_arm(base)};
    } else {
      eval.arms = {{default_arm_name(base), base}};
    }

    if (!errors.empty()) {
      json fields = json::array();
      for (const auto& e : errors) fields.push_back({{"field", e.field}, {"message", e.message}});
      send_error(res, 422, "invalid run configuration", {{"fields", fields}});
      return;
    }

    auto job = std::make_shared<Job>();
    job->eval = std::move(eval);
    job->dataset = std::move(dataset);
    job->registry = std::move(snapshot);
    for (const auto& arm : job->eval.arms) job->arm_names.push_back(arm.name);
    const auto sampled = job->eval.sample_size == 0 ? job->dataset.size() : job->eval.sample_size;
    job->total = sampled * job->eval.arms.size();

    json state;
    {
      std::lock_guard lock(jobs_mutex);
      char id[32];
      std::snprintf(id, sizeof id, "run-%06zu", next_job++);
      job->id = id;
      if (!options.data_dir.empty()) {
        std::error_code ec;
        fs::create_directories(run_dir(job->id), ec);
        write_file(run_dir(job->id) / "request.json", body.dump(2) + "\n");
      }
      persist_state(*job);
      jobs[job->id] = job;
      queue.push_back(job);
      state = state_json(*job);
    }
    jobs_cv.notify_one();
    send_json(res, 202, state);
  }

  std::shared_ptr<Job> find_job(const std::string& id) {
    std::lock_guard lock(jobs_mutex);
    auto it = jobs.find(id);
    return it == jobs.end() ? nullptr : it->second;
  }

  void get_run(const std::string& id, httplib::Response& res) {
    auto job = find_job(id);
    if (!job) {
      send_error(res, 404, "unknown run", {{"id", id}});
      return;
    }
    std::lock_guard lock(jobs_mutex);
    auto body = state_json(*job);
    if (job->state == "done") body["report"] = job->report;
    send_json(res, 200, body);
  }

  void get_trace(const std::string& id, const std::string& query_id, const std::string& arm, httplib::Response& res) {
    auto job = find_job(id);
    if (!job) {
      send_error(res, 404, "unknown run", {{"id", id}});
      return;
    }
    std::lock_guard lock(jobs_mutex);
    auto it = job->traces.find(query_id);
    if (it == job->traces.end()) {
      send_error(res, 404, "unknown or unfinished query", {{"id", id}, {"query_id", query_id}});
      return;
    }
    if (!arm.empty()) {
      for (const auto& [name, record] : it->second) {
        if (name == arm) {
          auto out = record;
          out["arm"] = name;
          send_json(res, 200, out);
          return;
        }
      }
      send_error(res, 404, "unknown arm", {{"arm", arm}});
      return;
    }
    // Report arms in the job's declared order, not completion order.
    json records = json::array();
    for (const auto& name : job->arm_names) {
      for (const auto& [arm_name, record] : it->second) {
        if (arm_name != name) continue;
        auto out = record;
        out["arm"] = arm_name;
        records.push_back(std::move(out));
      }
    }
    send_json(res, 200, {{"run_id", id}, {"query_id", query_id}, {"records", records}});
  }
};

Service::Service(SourceRegistry registry, std::shared_ptr<LlmClient> llm, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(registry), std::move(llm), std::move(options))) {}

Service::~Service() = default;

bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->shutdown(); }

}  // namespace msrag
