#pragma once

// Counter-based reproducible randomness.
//
// All stochastic work in the library draws from xoshiro256** streams whose
// seeds are derived, via a splitmix64-style mixer, from (master seed, slot
// index). A "slot" is a logical unit of work (particle i, simulation j,
// training batch k). Because a slot's stream depends only on the indices and
// never on execution order, results are bit-identical for any thread count.
//
// Distribution transforms (uniform, normal, exponential, Laplace) are
// implemented here rather than taken from <random>: the standard library
// does not pin their bit-level behaviour across implementations.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "sbikit/core/errors.hpp"

namespace sbikit {

namespace detail {

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256** by Blackman & Vigna; state expanded from a 64-bit seed with
// splitmix64 so that nearby seeds yield unrelated streams.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) {
      sm += 0x9e3779b97f4a7c15ULL;
      word = detail::splitmix64_mix(sm);
    }
    // All-zero state is invalid for xoshiro; unreachable via splitmix64 on
    // four consecutive counters, but cheap to guard.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next() {
    const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw DomainError("uniform: require lo < hi");
    return lo + (hi - lo) * uniform();
  }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_int: n must be positive");
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0,1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) {
    if (!(sd >= 0.0)) throw DomainError("normal: sd must be non-negative");
    return mean + sd * normal();
  }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw DomainError("exponential: rate must be positive");
    return -std::log(1.0 - uniform()) / rate;
  }

  double laplace(double loc, double scale) {
    if (!(scale > 0.0)) throw DomainError("laplace: scale must be positive");
    const double u = uniform() - 0.5;
    const double sgn = (u >= 0.0) ? 1.0 : -1.0;
    return loc - scale * sgn * std::log(1.0 - 2.0 * std::fabs(u));
  }

 private:
  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Hierarchical seed derivation. `derive(i)` is a pure function of
// (root, i); `sub(i)` opens a child namespace so nested loops can hand out
// collision-free seeds without coordination.
struct SeedStream {
  std::uint64_t root;

  std::uint64_t derive(std::uint64_t index) const {
    std::uint64_t z = root ^ detail::splitmix64_mix(index + 0x632be59bd9b4e019ULL);
    return detail::splitmix64_mix(z);
  }

  SeedStream sub(std::uint64_t index) const { return SeedStream{derive(index)}; }

  Rng stream(std::uint64_t index) const { return Rng(derive(index)); }
};

}  // namespace sbikit
