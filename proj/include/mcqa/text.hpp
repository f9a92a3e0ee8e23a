#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace mcqa::text {

// Trim leading/trailing whitespace and collapse internal runs of
// whitespace (space, tab, CR, LF, VT, FF) to a single space.
std::string normalize_whitespace(std::string_view s);

// ASCII-only lowercasing; multi-byte UTF-8 sequences pass through untouched.
std::string to_lower(std::string_view s);

// normalize_whitespace + to_lower, the canonical form used for all
// text-equality and containment tests.
std::string canonical(std::string_view s);

// Number of UTF-8 code points (continuation bytes are not counted).
// This is the length metric for the longest-choice bias measurements.
std::size_t codepoint_count(std::string_view s);

bool contains(std::string_view haystack, std::string_view needle);

}  // namespace mcqa::text
