#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace fleetsim {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256** with splitmix64 seeding. The standard library engines are
// reproducible but their distributions are not, so all draws go through the
// explicit conversions below and results are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Lemire's multiply-shift rejection method.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * span;
    std::uint64_t l = static_cast<std::uint64_t>(m);
    if (l < span) {
      const std::uint64_t threshold = (0 - span) % span;
      while (l < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * span;
        l = static_cast<std::uint64_t>(m);
      }
    }
    return lo + static_cast<std::int64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  // Index sampled proportionally to non-negative weights (inverse CDF walk).
  int sample_weights(std::span<const double> weights, double total) {
    const double u = uniform() * total;
    double acc = 0.0;
    const int n = static_cast<int>(weights.size());
    for (int i = 0; i < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    // Rounding can push u past the accumulated total; return the last
    // positive-weight entry.
    for (int i = n - 1; i >= 0; --i) {
      if (weights[i] > 0.0) return i;
    }
    return n - 1;
  }

  // Independent sub-stream keyed by a label and index.
  Rng derive(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    std::uint64_t mix = state_[0] ^ rotl(state_[3], 13) ^ h ^ (index * 0x9e3779b97f4a7c15ull);
    return Rng(splitmix64_next(mix));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace fleetsim
