#pragma once

#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "octseg/error.hpp"

namespace octseg {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// skipped; surrounding whitespace is trimmed.
inline std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& name) {
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::vector<KeyValue> out;
  std::size_t start = 0, line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(name, line_no, "expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(name, line_no, "empty key");
    out.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return out;
}

template <typename T>
T parse_number(const KeyValue& kv, const std::string& name) {
  T v{};
  const char* b = kv.value.data();
  const char* e = b + kv.value.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || kv.value.empty())
    throw ParseError(name, kv.line, "bad value for '" + kv.key + "': '" + kv.value + "'");
  return v;
}

}  // namespace octseg
