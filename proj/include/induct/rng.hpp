#pragma once

#include <cmath>
#include <cstdint>

namespace induct::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

/// SplitMix64 output function (Steele, Lea & Flood). Bijective on u64.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives a stream key from (seed, lane_a, lane_b). Streams for distinct
/// lanes are decorrelated by two mixing rounds; lane_a is typically a
/// purpose tag, lane_b a worker or grid-point index.
inline constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t lane_a,
                                          std::uint64_t lane_b = 0) {
  std::uint64_t h = mix64(seed + kGamma);
  h = mix64(h ^ (lane_a * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull));
  h = mix64(h ^ (lane_b * 0xDA942042E4DD58B5ull + 0x9E6C63D0876A9A63ull));
  return h;
}

/// Counter-based stream: output k is mix64(key + k*gamma), so draws are
/// random-access and a stream is fully determined by its 64-bit key.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  static Stream from(std::uint64_t seed, std::uint64_t lane_a, std::uint64_t lane_b = 0) {
    return Stream(derive_key(seed, lane_a, lane_b));
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform draw in (0, 1]; never returns 0 so logs are safe.
  double next_unit() {
    return 1.0 - static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (cosine branch); consumes two counters.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace induct::rng
