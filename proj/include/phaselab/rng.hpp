#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace phaselab {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for a named sub-stream ("dataset", "measure", "train", "scan", ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based generator: every draw is a pure function of
/// (key, counter, lane), so per-pixel sampling is order independent.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : key_(mix64(key)) {}

  constexpr std::uint64_t bits(std::uint64_t counter, std::uint64_t lane = 0) const {
    return mix64(mix64(key_ ^ counter) + lane * 0xd1b54a32d192ed03ULL);
  }

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t counter, std::uint64_t lane = 0) const {
    return (static_cast<double>(bits(counter, lane) >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, std::uint64_t lane, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter, lane);
  }

  /// Standard normal via Box-Muller over lanes (2*lane, 2*lane+1).
  double normal(std::uint64_t counter, std::uint64_t lane = 0) const {
    const double u1 = uniform(counter, 2 * lane);
    const double u2 = uniform(counter, 2 * lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

/// Sequential convenience wrapper over CounterRng for non-parallel code paths.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t key) : rng_(key) {}
  double uniform() { return rng_.uniform(counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return rng_.normal(counter_++); }
  std::uint64_t below(std::uint64_t n) { return rng_.bits(counter_++) % n; }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace phaselab
