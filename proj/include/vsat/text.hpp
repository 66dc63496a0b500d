#pragma once

// UTF-8 helpers and the token normalization shared by the language detectors
// and the edit-rate metric. All "character" counts in the project are Unicode
// code points.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace vsat::text {

/// Decodes UTF-8 into code points. Invalid sequences decode to U+FFFD.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view cps);
std::string encode(char32_t cp);

std::size_t length(std::string_view utf8);

/// Substring by code-point offsets [begin, end).
std::string substr(std::string_view utf8, std::size_t begin, std::size_t end);

char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view utf8);

bool is_alnum(char32_t cp);
bool is_space(char32_t cp);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Whitespace-separated words, no normalization.
std::vector<std::string> split_words(std::string_view utf8);

/// Lowercase, drop [bracketed tags], strip everything that is not a letter or
/// digit except apostrophes between two alphanumerics, split on the rest.
std::vector<std::string> normalize_tokens(std::string_view utf8);

std::string trim(std::string_view s);

}  // namespace vsat::text
