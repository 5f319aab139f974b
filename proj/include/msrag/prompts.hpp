#pragma once

#include <string>
#include <string_view>

namespace msrag::prompts {

// Template names, one per file under assets/prompts.
inline constexpr std::string_view kRouting = "routing";
inline constexpr std::string_view kDecompose = "decompose";
inline constexpr std::string_view kDecomposeRetry = "decompose_retry";
inline constexpr std::string_view kSynthesis = "synthesis";
inline constexpr std::string_view kJudge = "judge";
inline constexpr std::string_view kFusion = "fusion";

/// Returns the embedded template text. Throws std::out_of_range for unknown names.
const std::string& get(std::string_view name);

}  // namespace msrag::prompts
