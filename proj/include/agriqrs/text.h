#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace agriqrs::text {

// ASCII alphanumerics and any non-ASCII byte (UTF-8 text in regional
// scripts) count as token characters; everything else separates tokens.
bool is_token_char(unsigned char c);

std::string to_lower_ascii(std::string_view s);

// Lowercases, replaces every non-token character with a space and splits on
// whitespace.
std::vector<std::string> tokenize(std::string_view s);

// Trims and collapses runs of whitespace to single spaces. Case preserved.
std::string collapse_whitespace(std::string_view s);

// Replaces ASCII punctuation and control characters with spaces, then
// collapses whitespace. Case preserved.
std::string strip_special(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// True iff `phrase` occurs as a contiguous run inside `tokens`.
bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& phrase);

// Decodes UTF-8 into code points; invalid bytes decode to themselves.
std::vector<char32_t> code_points(std::string_view s);

// Reads a one-entry-per-line file; blank lines and lines starting with '#'
// are skipped. Throws ConfigError when the file cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace agriqrs::text
