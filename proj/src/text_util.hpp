#pragma once

// Small text helpers shared by the line-oriented file readers.

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "aitwin/error.hpp"

namespace aitwin::detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Splits on sep and trims every piece; empty pieces are dropped.
inline std::vector<std::string> splitTrimmed(std::string_view s, char sep) {
  std::vector<std::string> out;
  for (auto& piece : split(s, sep)) {
    auto t = trim(piece);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline double parseReal(std::string_view text, std::size_t line) {
  std::string buf(trim(text));
  if (buf.empty()) throw ParseError(line, "expected a number");
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || errno == ERANGE) throw ParseError(line, "not a number: '" + buf + "'");
  return v;
}

inline long long parseInt(std::string_view text, std::size_t line) {
  std::string buf(trim(text));
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(buf.c_str(), &end, 10);
  if (buf.empty() || end != buf.c_str() + buf.size() || errno == ERANGE)
    throw ParseError(line, "not an integer: '" + buf + "'");
  return v;
}

inline bool isIdentifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = s.front();
  if (!(std::isalpha(static_cast<unsigned char>(head)) || head == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

}  // namespace aitwin::detail
