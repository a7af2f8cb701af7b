#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "cashbo/error.hpp"

namespace cashbo {

// Doubles cross file boundaries as the 16-hex-digit IEEE-754 bit pattern so
// that save/load round-trips are bit-exact on every platform.
inline std::string to_hex16(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = "0123456789abcdef"[bits & 0xF];
    bits >>= 4;
  }
  return out;
}

inline double from_hex16(std::string_view s) {
  if (s.size() != 16) throw ConfigError("bad hex double '" + std::string(s) + "'");
  std::uint64_t bits = 0;
  for (char c : s) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else throw ConfigError("bad hex double '" + std::string(s) + "'");
    bits = (bits << 4) | static_cast<std::uint64_t>(v);
  }
  double x;
  std::memcpy(&x, &bits, sizeof(x));
  return x;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string to_hex16_u64(std::uint64_t bits) {
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = "0123456789abcdef"[bits & 0xF];
    bits >>= 4;
  }
  return out;
}

inline std::uint64_t from_hex16_u64(std::string_view s) {
  if (s.size() != 16) throw ConfigError("bad hex u64 '" + std::string(s) + "'");
  std::uint64_t bits = 0;
  for (char c : s) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else throw ConfigError("bad hex u64 '" + std::string(s) + "'");
    bits = (bits << 4) | static_cast<std::uint64_t>(v);
  }
  return bits;
}

}  // namespace cashbo
