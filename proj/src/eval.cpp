#include "msrag/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "msrag/text.hpp"

namespace msrag {

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words{"a", "an", "the"};
  return words;
}

std::vector<std::string> normalize(std::string_view text, const std::set<std::string>& stopwords) {
  auto tokens = text::simple_tokens(text);
  std::erase_if(tokens, [&](const std::string& t) { return stopwords.contains(t); });
  return tokens;
}

int exact_match(std::string_view prediction, std::string_view gold) {
  return normalize(prediction) == normalize(gold) ? 1 : 0;
}

double f1(std::string_view prediction, std::string_view gold) {
  const auto pred = normalize(prediction);
  const auto ref = normalize(gold);
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;

  std::map<std::string, std::size_t> counts;
  for (const auto& t : ref) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

int exact_match_any(std::string_view prediction, const std::vector<std::string>& golds) {
  int best = 0;
  for (const auto& g : golds) best = std::max(best, exact_match(prediction, g));
  return best;
}

double f1_any(std::string_view prediction, const std::vector<std::string>& golds) {
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, f1(prediction, g));
  return best;
}

std::vector<std::size_t> sample_indices(std::size_t dataset_size, std::size_t n) {
  if (n < 1 || n > dataset_size) {
    throw std::invalid_argument("sample size " + std::to_string(n) + " must be in [1, " +
                                std::to_string(dataset_size) + "]");
  }
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i * dataset_size / n;
  return out;
}

std::vector<QueryItem> parse_dataset(std::string_view jsonl) {
  std::vector<QueryItem> items;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    auto line = text::trim(jsonl.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    start = end == std::string_view::npos ? jsonl.size() : end + 1;
    ++line_no;
    if (line.empty()) continue;

    auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": not a JSON object");
    }
    QueryItem item;
    item.question = record.value("question", std::string{});
    if (text::trim(item.question).empty()) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": missing 'question'");
    }
    if (auto id = record.find("id"); id != record.end()) {
      item.id = id->is_string() ? id->get<std::string>() : id->dump();
    } else {
      item.id = "q" + std::to_string(items.size());
    }
    if (auto a = record.find("answers"); a != record.end() && a->is_array()) {
      for (const auto& v : *a) {
        if (v.is_string()) item.answers.push_back(v.get<std::string>());
      }
    }
    if (auto a = record.find("answer"); a != record.end() && a->is_string()) item.answers.push_back(a->get<std::string>());
    if (auto s = record.find("gold_source"); s != record.end() && s->is_string()) item.gold_source = s->get<std::string>();
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<QueryItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

Arm hard_routing_arm(PipelineConfig base) {
  base.budget.mode = RoutingMode::hard;
  return {"Hard Routing", std::move(base)};
}

Arm adaptive_cap_arm(PipelineConfig base) {
  base.budget.mode = RoutingMode::adaptive;
  return {"Adaptive Cap", std::move(base)};
}

RunRecord evaluate_query(const QueryItem& item, const SourceRegistry& registry, const PipelineConfig& config,
                         LlmClient& llm) {
  RunRecord record;
  record.query_id = item.id;
  record.question = item.question;
  record.gold_answers = item.answers;
  try {
    auto run = run_question(item.question, registry, config, llm);
    record.final_answer = run.final_answer;
    record.em = exact_match_any(run.final_answer, item.answers);
    record.f1 = f1_any(run.final_answer, item.answers);
    record.prompt_tokens = run.usage.prompt_tokens;
    record.wall_ms = run.wall_ms;
    record.run = std::move(run);
  } catch (const std::exception& e) {
    record.fault = e.what();
    record.em = 0;
    record.f1 = 0.0;
  }
  return record;
}

ComparisonReport run_comparison(const EvalConfig& config, const std::vector<QueryItem>& dataset,
                                const SourceRegistry& registry, LlmClient& llm, const ProgressCallback& progress) {
  if (dataset.empty()) throw std::invalid_argument("dataset is empty");
  ComparisonReport report;
  report.dataset_size = dataset.size();
  report.sampled_indices = sample_indices(dataset.size(), config.sample_size == 0 ? dataset.size() : config.sample_size);
  for (auto i : report.sampled_indices) report.query_ids.push_back(dataset[i].id);

  const std::size_t n = report.sampled_indices.size();
  for (const auto& arm : config.arms) {
    ArmReport arm_report;
    arm_report.name = arm.name;
    arm_report.config = arm.config;
    arm_report.records.resize(n);

    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        const auto& item = dataset[report.sampled_indices[i]];
        if (config.should_stop && config.should_stop()) {
          auto& r = arm_report.records[i];
          r.query_id = item.id;
          r.question = item.question;
          r.gold_answers = item.answers;
          r.fault = "cancelled";
        } else {
          arm_report.records[i] = evaluate_query(item, registry, arm.config, llm);
        }
        if (progress) {
          std::lock_guard lock(progress_mutex);
          progress(arm.name, arm_report.records[i]);
        }
      }
    };
    const std::size_t workers = std::clamp<std::size_t>(config.concurrency, 1, n);
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    for (const auto& r : arm_report.records) {
      arm_report.mean_em += r.em;
      arm_report.mean_f1 += r.f1;
      arm_report.mean_prompt_tokens += static_cast<double>(r.prompt_tokens);
      arm_report.mean_latency_ms += r.wall_ms;
    }
    const auto count = static_cast<double>(n);
    arm_report.mean_em /= count;
    arm_report.mean_f1 /= count;
    arm_report.mean_prompt_tokens /= count;
    arm_report.mean_latency_ms /= count;
    report.arms.push_back(std::move(arm_report));
  }
  return report;
}

}  // namespace msrag
