#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msrag/eval.hpp"

namespace msrag {

// Wire/report encodings. Field names follow the configuration parameter
// names (top_k_per_source, keep_k, selector, preferred_cap, other_cap, ...).

nlohmann::json to_json(const PipelineConfig& config);

/// Overlays the fields present in `j` onto `base`. Type and range problems
/// are appended to `errors` with `prefix` prepended to the field name; the
/// budget invariants are checked as well.
PipelineConfig pipeline_from_json(const nlohmann::json& j, const PipelineConfig& base, std::vector<FieldError>& errors,
                                  const std::string& prefix = {});

nlohmann::json to_json(const EvidenceSet& evidence);
nlohmann::json to_json(const SubqueryResult& result);
nlohmann::json to_json(const RunRecord& record, bool include_timing);

/// Per-arm aggregates plus per-query records. Wall-clock fields are only
/// written when `include_timing` is set, so the untimed form is
/// reproducible byte for byte.
nlohmann::json to_json(const ComparisonReport& report, bool include_timing);

/// Aligned text table with columns Method, EM, F1, Avg Tokens (EM/F1 in percent).
std::string render_table(const nlohmann::json& report);
std::string render_table(const ComparisonReport& report);

}  // namespace msrag
