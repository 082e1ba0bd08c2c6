#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace raglab {

/// Collapses every run of whitespace to a single space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// ASCII lowercase; bytes outside [A-Z] pass through unchanged.
std::string to_lower(std::string_view text);

/// Lowercases, then splits on any non-alphanumeric byte. Empty tokens are
/// dropped. Bytes >= 0x80 are kept as token characters so multi-byte UTF-8
/// words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Whitespace-separated token count. Budget warnings only, never truncation.
std::size_t whitespace_token_count(std::string_view text);

}  // namespace raglab
