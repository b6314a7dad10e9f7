#include "qarag/text.hpp"

#include <cctype>

namespace qarag::text {
namespace {

// Decodes one code point at s[i]; advances i. Invalid sequences decode as U+FFFD, one byte.
char32_t decode(std::string_view s, std::size_t& i) noexcept {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  // Reject overlong forms and surrogates.
  static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++i;
    return 0xFFFD;
  }
  i += len;
  return cp;
}

}  // namespace

bool is_unicode_space(char32_t cp) noexcept {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_valid_utf8(std::string_view s) noexcept {
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t start = i;
    const char32_t cp = decode(s, i);
    if (cp == 0xFFFD && !(i - start == 3 && s.substr(start, 3) == "\xEF\xBF\xBD")) return false;
  }
  return true;
}

std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t at = i;
    out.push_back({at, decode(s, i)});
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  std::size_t token_start = std::string_view::npos;
  while (i < s.size()) {
    const std::size_t at = i;
    const char32_t cp = decode(s, i);
    if (is_unicode_space(cp)) {
      if (token_start != std::string_view::npos) {
        out.emplace_back(s.substr(token_start, at - token_start));
        token_start = std::string_view::npos;
      }
    } else if (token_start == std::string_view::npos) {
      token_start = at;
    }
  }
  if (token_start != std::string_view::npos) out.emplace_back(s.substr(token_start));
  return out;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  {
    std::size_t i = 0;
    while (i < s.size()) {
      const std::size_t at = i;
      if (!is_unicode_space(decode(s, i))) {
        begin = at;
        break;
      }
      begin = i;
    }
  }
  // Scan forward again to find the end of the last non-space code point.
  std::size_t last_end = begin;
  std::size_t i = begin;
  while (i < end) {
    if (!is_unicode_space(decode(s, i))) last_end = i;
  }
  return s.substr(begin, last_end - begin);
}

std::string_view strip_punct(std::string_view s) {
  auto is_p = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_p(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_p(s.back())) s.remove_suffix(1);
  return s;
}

std::string first_sentence(std::string_view s) {
  const std::string_view t = trim(s);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (c != '.' && c != '?' && c != '!') continue;
    if (i + 1 == t.size()) return std::string(t);
    std::size_t j = i + 1;
    if (is_unicode_space(decode(t, j))) return std::string(t.substr(0, i + 1));
  }
  return std::string(t);
}

std::string truncate_tokens(std::string_view s, std::size_t max_tokens) {
  if (max_tokens == 0) return {};
  std::size_t tokens = 0;
  bool in_token = false;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t at = i;
    const bool space = is_unicode_space(decode(s, i));
    if (space && in_token) {
      in_token = false;
      if (tokens == max_tokens) return std::string(s.substr(0, at));
    } else if (!space && !in_token) {
      in_token = true;
      ++tokens;
    }
  }
  return std::string(s);
}

}  // namespace qarag::text
