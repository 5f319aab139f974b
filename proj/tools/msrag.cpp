#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "msrag/config.hpp"
#include "msrag/corpus.hpp"
#include "msrag/eval.hpp"
#include "msrag/pipeline.hpp"
#include "msrag/report.hpp"
#include "msrag/service.hpp"
#include "msrag/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msrag;

namespace {

// Failures that end the command with exit status 1.
struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    auto t = std::string(text::trim(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CommandError("cannot write " + path.string());
  out << content;
}

std::vector<Preset> load_presets_if_set(const CliConfig& config) {
  if (config.presets.empty()) return {};
  return load_presets(config.presets);
}

const Preset* find_preset(const std::vector<Preset>& presets, const std::string& name) {
  for (const auto& p : presets) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::vector<SourceSpec> manifest_specs(const CliConfig& config) {
  const fs::path manifest = config.effective_sources_manifest();
  if (!fs::exists(manifest)) return {};
  return load_source_manifest(manifest);
}

// Preset sources when a preset is chosen, otherwise the ingested sources.
SourceRegistry query_registry(const CliConfig& config, const std::vector<Preset>& presets,
                              const std::vector<std::string>& only) {
  std::vector<SourceSpec> specs;
  if (!config.preset.empty()) {
    const auto* preset = find_preset(presets, config.preset);
    if (!preset) throw CommandError("unknown preset '" + config.preset + "'");
    specs = preset->sources;
  } else {
    specs = manifest_specs(config);
  }
  if (specs.empty()) throw CommandError("no sources: ingest a corpus or choose a preset");
  auto registry = build_registry(specs);
  return only.empty() ? registry : registry.subset(only);
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string file;
  std::string name;
  std::string profile;
  std::string format;
};

int cmd_ingest(const CliConfig& config, const IngestArgs& args) {
  std::optional<CorpusFormat> format =
      args.format.empty() ? corpus_format_from_path(args.file) : parse_corpus_format(args.format);
  if (!format) throw CommandError("cannot tell corpus format; pass --format json|csv");

  const fs::path manifest = config.effective_sources_manifest();
  auto specs = manifest_specs(config);
  for (const auto& s : specs) {
    if (s.name == args.name) throw CorpusError(CorpusError::Kind::duplicate_source, "duplicate source '" + args.name + "'");
  }
  SourceRegistry registry;
  auto profile = ingest_corpus(registry, args.file, *format, args.name, args.profile);

  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  specs.push_back({args.name, args.profile, fs::absolute(args.file), *format});
  save_source_manifest(manifest, specs);
  std::cout << "source: " << profile.name << "\n"
            << "document_count: " << profile.document_count << "\n";
  return 0;
}

// ---- ask ------------------------------------------------------------------

std::string format_counts(const std::map<std::string, std::size_t>& counts) {
  std::string out = "{";
  bool first = true;
  for (const auto& [name, n] : counts) {
    out += (first ? "" : ", ") + name + ": " + std::to_string(n);
    first = false;
  }
  return out + "}";
}

void print_trace(const QuestionRun& run, std::ostream& os) {
  os << "plan: " << run.plan.subqueries.size() << " subquer" << (run.plan.subqueries.size() == 1 ? "y" : "ies");
  if (run.plan.fallback_reason) os << " (identity fallback: " << *run.plan.fallback_reason << ")";
  os << "\n";
  for (const auto& sq : run.subqueries) {
    os << "subquery " << sq.index << ": " << sq.bound_query << "\n";
    for (const auto& attempt : sq.trace) {
      os << "  attempt " << attempt.attempt << "\n";
      if (attempt.routing) {
        os << "    preferred source: " << attempt.routing->preferred_source.value_or("none") << "\n";
      } else {
        os << "    preferred source: (not routed)\n";
      }
      os << "    retrieved per source: " << format_counts(attempt.pool_counts) << "\n";
      for (const auto& f : attempt.retrieval_failures) os << "    retrieval failure: " << f.source << ": " << f.message << "\n";
      os << "    capped per source: " << format_counts(attempt.evidence.capped_counts) << "\n";
      for (const auto& item : attempt.evidence.items) {
        char score[64];
        std::snprintf(score, sizeof score, "%.4f", item.selection_score);
        os << "    evidence " << item.candidate.document.id << " (" << item.candidate.source << ") score " << score
           << "\n";
      }
      for (const auto& note : attempt.evidence.notes) os << "    note: " << note << "\n";
      os << "    answer: " << attempt.generation.answer << "\n"
         << "    sufficient: " << (attempt.generation.sufficient ? "yes" : "no") << "\n";
    }
    if (!sq.fail_history.empty()) os << "  " << sq.fail_history.render() << "\n";
    if (sq.fallback) os << "  fallback answer used\n";
    os << "  subquery answer: " << sq.answer << "\n";
  }
  if (run.fusion_fallback) os << "fusion fallback" << (run.fusion_error ? ": " + *run.fusion_error : "") << "\n";
  os << "llm calls: " << run.llm_calls << ", prompt tokens: " << run.usage.prompt_tokens << "\n";
}

int cmd_ask(const CliConfig& config, const std::string& question, const std::vector<std::string>& only, bool trace) {
  auto presets = load_presets_if_set(config);
  auto registry = query_registry(config, presets, only);
  auto llm = make_llm(config.llm, process_env());
  auto run = run_question(question, registry, config.pipeline, *llm);
  if (trace) print_trace(run, std::cout);
  std::cout << "answer: " << run.final_answer << "\n";
  return 0;
}

// ---- compare --------------------------------------------------------------

struct CompareArgs {
  std::string dataset;
  std::string out;
  std::string arms = "hard,adaptive";
  std::vector<std::string> only;
};

int cmd_compare(const CliConfig& config, const CompareArgs& args) {
  auto presets = load_presets_if_set(config);
  fs::path dataset_path = args.dataset;
  if (dataset_path.empty() && !config.preset.empty()) {
    const auto* preset = find_preset(presets, config.preset);
    if (preset && preset->dataset) dataset_path = *preset->dataset;
  }
  if (dataset_path.empty()) throw CommandError("no dataset: pass --dataset or a preset with a dataset");

  EvalConfig eval;
  eval.sample_size = config.sample_size;
  eval.concurrency = config.concurrency;
  for (const auto& arm : split_list(args.arms)) {
    if (arm == "hard") {
      eval.arms.push_back(hard_routing_arm(config.pipeline));
    } else if (arm == "adaptive") {
      eval.arms.push_back(adaptive_cap_arm(config.pipeline));
    } else {
      throw CommandError("unknown arm '" + arm + "' (expected hard or adaptive)");
    }
  }
  if (eval.arms.empty()) throw CommandError("no arms to run");

  auto dataset = load_dataset(dataset_path);
  if (eval.sample_size > dataset.size()) {
    throw CommandError("sample size " + std::to_string(eval.sample_size) + " exceeds dataset size " +
                       std::to_string(dataset.size()));
  }
  auto registry = query_registry(config, presets, args.only);
  auto llm = make_llm(config.llm, process_env());
  auto report = run_comparison(eval, dataset, registry, *llm);

  const fs::path out = args.out.empty() ? fs::path(config.data_dir) / "compare" : fs::path(args.out);
  fs::create_directories(out);
  const auto report_json = to_json(report, false);
  write_text(out / "report.json", report_json.dump(2) + "\n");
  write_text(out / "timings.json", to_json(report, true).dump(2) + "\n");
  const auto table = render_table(report_json);
  write_text(out / "table.txt", table);
  std::cout << table;
  std::cout << "report: " << (out / "report.json").string() << "\n";
  return 0;
}

// ---- serve ----------------------------------------------------------------

int cmd_serve(const CliConfig& config, const std::string& static_dir) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto presets = load_presets_if_set(config);
  auto specs = manifest_specs(config);
  for (const auto& preset : presets) {
    for (const auto& s : preset.sources) {
      bool known = std::any_of(specs.begin(), specs.end(), [&](const SourceSpec& x) { return x.name == s.name; });
      if (!known) specs.push_back(s);
    }
  }
  auto registry = build_registry(specs);
  std::shared_ptr<LlmClient> llm = make_llm(config.llm, process_env());

  ServiceOptions options;
  options.data_dir = config.data_dir;
  options.query_concurrency = config.concurrency;
  options.defaults = config.pipeline;
  options.presets = presets;
  if (!static_dir.empty()) options.static_dir = static_dir;

  Service service(std::move(registry), llm, options);
  if (!service.bind(config.host, config.port)) {
    throw CommandError("cannot bind " + config.host + ":" + std::to_string(config.port));
  }
  std::cerr << "listening on " << config.host << ":" << config.port << "\n";

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.run();
  // run() also returns on a failed accept loop; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cerr << "stopped\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source retrieval-augmented QA: ingest, ask, compare, serve"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");
  std::map<std::string, std::string> flags;
  for (const auto& field : config_fields()) {
    auto key = field.key;
    auto* opt = app.add_option_function<std::string>(
        field.flag, [&flags, key](const std::string& v) { flags[key] = v; }, field.help);
    if (key == "decompose" || key == "use_reflection") {
      // A bare switch means true; an explicit value must be attached (--decompose=false).
      opt->expected(0, 1)->default_str("true")->type_name("[=BOOL]");
    } else {
      opt->type_name("VALUE");
    }
  }

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse, index and register a corpus file");
  ingest_cmd->add_option("--file", ingest.file, "Corpus file (.json or .csv)")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--name", ingest.name, "Source name")->required();
  ingest_cmd->add_option("--profile", ingest.profile, "Profile text shown to the router")->required();
  ingest_cmd->add_option("--format", ingest.format, "json or csv (default: from extension)");

  std::string question;
  std::string ask_sources;
  bool trace = false;
  auto* ask_cmd = app.add_subcommand("ask", "Answer one question");
  ask_cmd->add_option("question", question, "Question text")->required();
  ask_cmd->add_option("--sources", ask_sources, "Comma-separated subset of sources");
  ask_cmd->add_flag("--trace", trace, "Print routing, evidence and attempts per sub-query");

  CompareArgs compare;
  std::string compare_sources;
  auto* compare_cmd = app.add_subcommand("compare", "Run arms over a dataset sample and report EM/F1/tokens");
  compare_cmd->add_option("--dataset", compare.dataset, "JSONL dataset (default: the preset's)");
  compare_cmd->add_option("--out", compare.out, "Output directory (default: <data-dir>/compare)");
  compare_cmd->add_option("--arms", compare.arms, "Comma-separated arms: hard, adaptive")->capture_default_str();
  compare_cmd->add_option("--sources", compare_sources, "Comma-separated subset of sources");

  std::string static_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--static", static_dir, "Directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    auto* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << failing->help();
    return 2;
  }

  try {
    json file_config;
    if (!config_path.empty()) file_config = load_config_file(config_path);
    const auto config = resolve_config(config_path.empty() ? nullptr : &file_config, process_env(), flags);

    if (ingest_cmd->parsed()) return cmd_ingest(config, ingest);
    if (ask_cmd->parsed()) return cmd_ask(config, question, split_list(ask_sources), trace);
    if (compare_cmd->parsed()) {
      compare.only = split_list(compare_sources);
      return cmd_compare(config, compare);
    }
    if (serve_cmd->parsed()) return cmd_serve(config, static_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
