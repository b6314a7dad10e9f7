#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qarag::text {

// True for ASCII whitespace and the Unicode White_Space code points.
bool is_unicode_space(char32_t cp) noexcept;

// Splits on Unicode whitespace (UTF-8 input). Invalid UTF-8 bytes are kept as token content.
std::vector<std::string> split_whitespace(std::string_view s);

// ASCII lowercase; non-ASCII bytes are passed through untouched.
std::string ascii_lower(std::string_view s);

// Trims Unicode whitespace from both ends.
std::string_view trim(std::string_view s);

// Strips leading and trailing ASCII punctuation.
std::string_view strip_punct(std::string_view s);

bool is_valid_utf8(std::string_view s) noexcept;

struct CodePoint {
  std::size_t offset;  // byte offset of the first byte
  char32_t value;      // U+FFFD for an invalid byte
};

std::vector<CodePoint> decode_utf8(std::string_view s);

// Everything up to and including the first '.', '?' or '!' that is followed by whitespace
// or the end of the string; the whole (trimmed) string when no terminator exists.
std::string first_sentence(std::string_view s);

// Keeps the original text up to the end of its n-th whitespace-delimited token.
std::string truncate_tokens(std::string_view s, std::size_t max_tokens);

}  // namespace qarag::text
