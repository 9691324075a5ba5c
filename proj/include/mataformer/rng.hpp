#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mata {

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic generator used everywhere randomness is needed. We avoid the
// std distributions because their output is implementation-defined and the
// generated artifacts must be byte-identical across runs and toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // burn one output so seed 0 and seed from split() diverge immediately
    splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1) with 53 bits of precision
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // unbiased integer in [0, n)
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t threshold = (0ull - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal via Box-Muller (two uniforms per draw, no cached spare)
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // exp(ln(median) + sigma * z); heavy-tailed for sigma around 1
  double lognormal(double median, double sigma) {
    return median * std::exp(sigma * normal());
  }

  // derive an independent stream, e.g. one per patient
  Rng split(uint64_t stream) const {
    uint64_t s = state_;
    uint64_t a = splitmix64(s);
    return Rng(a ^ (stream * 0x9e3779b97f4a7c15ull + 0x6a09e667f3bcc909ull));
  }

 private:
  uint64_t state_;
};

}  // namespace mata
