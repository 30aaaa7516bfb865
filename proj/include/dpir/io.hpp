#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace dpir {

// All floating-point output goes through this: 17 significant digits is
// enough to round-trip an IEEE double exactly.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// FNV-1a, used for config hashes in run summaries. Stable across platforms
// and process restarts, unlike std::hash.
inline std::uint64_t fnv1a_hash(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_string(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dpir
