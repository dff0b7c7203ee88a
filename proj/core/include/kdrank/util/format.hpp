#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <string>

namespace kdrank {

/// Shortest text that parses back to exactly `v`.
inline std::string format_shortest(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string format_fixed(double v, int decimals) {
  std::array<char, 64> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.*f", decimals, v);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

}  // namespace kdrank
