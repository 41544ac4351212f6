#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace parlvote::text {

// ASCII-only case folding; bytes >= 0x80 pass through untouched.
std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
// Replaces every whitespace run with a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);
bool is_word_byte(unsigned char c);

}  // namespace parlvote::text
