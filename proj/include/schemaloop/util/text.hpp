#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace schemaloop::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Collapses every run of whitespace into one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

// Removes leading/trailing ASCII punctuation from a single token.
std::string strip_punctuation(std::string_view token);

// Case-folded, punctuation-stripped, whitespace-split tokens; empty tokens dropped.
std::vector<std::string> word_tokens(std::string_view s);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

// "http://h:1/a/b/" -> {"http://h:1", "/a/b"}; the path has no trailing slash.
std::pair<std::string, std::string> split_url(std::string_view url);

}  // namespace schemaloop::text
