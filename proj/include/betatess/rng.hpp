#pragma once

#include <cstdint>
#include <limits>

namespace betatess {

// Counter-based generator: the n-th output is a SplitMix64 finalizer of (key + n * golden).
// Streams keyed by (seed, replicate, layer) are independent and reproducible in any order.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t replicate = 0, std::uint64_t layer = 0)
      : key_(mix(seed ^ mix(replicate + 0x632be59bd9b4e019ULL) ^ mix(mix(layer) + 0x9e3779b97f4a7c15ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace betatess
