#pragma once

// Deterministic randomness. The generator is fixed - not "whatever the
// platform provides" - because two parties must derive identical
// permutations and masks from a synced seed:
//
//   * state setup: four rounds of splitmix64 over the 64-bit seed
//   * stream: xoshiro256** (Blackman/Vigna)
//   * unit doubles: (x >> 11) * 2^-53, giving [0, 1)
//   * normals: Box-Muller on (u1, u2] pairs, second value cached
//   * bounded ints: modulo rejection with zone = 2^64 - (2^64 mod n)
//
// Identical seed therefore means an identical stream on every platform;
// tests/golden/rng_seed42.txt pins the first draws of seed 42.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "psh/tensor.hpp"

namespace psh {

namespace detail {
// splitmix64 finalizer (state already advanced)
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  return mix64(state);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = detail::splitmix64(sm);
  }

  // Independent child stream for (seed, tag). Used so that randomness
  // consumed per protocol round does not depend on request arrival order.
  static Rng derive(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t sm = tag;
    return Rng(seed ^ detail::splitmix64(sm));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = std::rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t zone = ~std::uint64_t(0) - (~std::uint64_t(0) % n + 1) % n;
    for (;;) {
      std::uint64_t x = next_u64();
      if (x <= zone) return x % n;
    }
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0,1] keeps the log finite
    const double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = double(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Tensor normal_tensor(Shape shape, double mean = 0.0, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(mean, stddev);
    return t;
  }

  Tensor uniform_tensor(Shape shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
    return t;
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace psh
