#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace msrag::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

/// Lowercases, drops ASCII punctuation and splits on whitespace runs.
/// Bytes outside ASCII are kept as part of tokens.
std::vector<std::string> simple_tokens(std::string_view s);

/// Splits on runs of ASCII whitespace.
std::vector<std::string_view> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Replaces every `{name}` whose name is a key of `vars` in one left-to-right
/// pass. Substituted values are never rescanned, unknown `{...}` spans are
/// copied through untouched.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace msrag::text
