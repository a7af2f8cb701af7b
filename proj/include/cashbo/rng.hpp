#pragma once

#include <cmath>
#include <cstdint>

namespace cashbo {

// Deterministic RNG with explicit substreams. Distributions are hand-rolled
// so that sequences are identical across platforms and standard library
// versions. fork(tag) depends only on the constructor seed and the tag, not
// on how much of this stream has been consumed, so forked streams can be
// handed to parallel workers without breaking reproducibility.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(splitmix(seed + 0x9E3779B97F4A7C15ULL)) {
    if (state_ == 0) state_ = 0x4d595df4d0f33173ULL;
  }

  std::uint64_t seed() const { return seed_; }

  Rng fork(std::uint64_t tag) const {
    return Rng(splitmix(splitmix(seed_ ^ 0xA24BAED4963EE407ULL) + tag));
  }

  std::uint64_t next_u64() {
    // xorshift64* core
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [lo, hi] inclusive.
  long long uniform_int(long long lo, long long hi) {
    const std::uint64_t n = static_cast<std::uint64_t>(hi - lo) + 1;
    const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
    return lo + static_cast<long long>(wide >> 64);
  }

  // Box-Muller, cosine branch only.
  double normal(double mean = 0.0, double sd = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + sd * z;
  }

private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace cashbo
