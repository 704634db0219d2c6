#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace graft {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// FNV-1a, used for layout compatibility hashes (stable across runs).
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Shortest round-trip decimal form, with a trailing ".0" for integral
// values so thresholds render as "8.0" rather than "8".
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".einf") == std::string::npos) s += ".0";
  return s;
}

}  // namespace graft
