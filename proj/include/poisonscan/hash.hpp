#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace poisonscan {

// FNV-1a, stable across platforms (replay keys, cache keys, mock seeding).
inline uint64_t fnv1a(std::string_view data, uint64_t seed = 14695981039346656037ULL) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace poisonscan
