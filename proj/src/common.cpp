#include "autoform/common.hpp"

#include <cctype>

namespace autoform {

std::string_view direction_name(Direction d) {
  return d == Direction::formalize ? "formalize" : "informalize";
}

Direction direction_from_name(std::string_view name) {
  if (name == "formalize") return Direction::formalize;
  if (name == "informalize") return Direction::informalize;
  throw ConfigError("unknown direction '" + std::string(name) +
                    "' (expected formalize or informalize)");
}

uint64_t fnv1a64(std::string_view bytes, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

static bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space_byte(s[b])) ++b;
  while (e > b && is_space_byte(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space_byte(s[i])) ++i;
    size_t start = i;
    while (i < s.size() && !is_space_byte(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (is_space_byte(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

bool is_blank(std::string_view s) {
  for (unsigned char c : s)
    if (!is_space_byte(c)) return false;
  return true;
}

std::string fill_template(
    std::string_view text,
    const std::vector<std::pair<std::string_view, std::string_view>>& slots) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      bool matched = false;
      for (const auto& [name, value] : slots) {
        if (text.substr(i).starts_with(name)) {
          out += value;
          i += name.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out += text[i++];
  }
  return out;
}

}  // namespace autoform
