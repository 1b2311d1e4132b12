#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace runcons {

// Names one reproducible random stream: a master seed plus a stream index.
// For a fixed master seed, distinct stream indices map to distinct generator
// states, so Monte Carlo paths can each own the stream whose index is the
// path number.
struct RngSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;

  RngSeed stream(std::uint64_t index) const { return {master_seed, index}; }
  RngSeed offset(std::uint64_t delta) const {
    return {master_seed, stream_index + delta};
  }
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Finalizer from splitmix64 (Steele, Lea, Flood); bijective on 64 bits.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Per-stream increment; must be odd with enough bit transitions (same fixup
// as SplittableRandom).
inline std::uint64_t mix_gamma(std::uint64_t z) {
  z = mix64(z) | 1ULL;
  if (std::popcount(z ^ (z >> 1)) < 24) z ^= 0xAAAAAAAAAAAAAAAAULL;
  return z;
}

}  // namespace detail

// Splittable splitmix64 stream. Each stream gets its own state and its own
// odd increment, so streams derived from different indices run on different
// full-period sequences.
class SplitStream {
 public:
  explicit SplitStream(RngSeed seed)
      : state_(detail::mix64(seed.master_seed + detail::kGolden) ^
               detail::mix64(seed.stream_index + 0x63D7963259C42FF3ULL)),
        gamma_(detail::mix_gamma(
            state_ ^ detail::mix64(seed.master_seed ^ ~seed.stream_index))) {}

  std::uint64_t next_u64() {
    state_ += gamma_;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe under log().
  double next_unit_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Standard normal via Box-Muller; the second element of each pair is
  // cached. Avoids std::normal_distribution, whose draw sequence is not
  // portable across standard libraries.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(next_unit_positive()));
    const double angle = 2.0 * std::numbers::pi * next_unit();
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  std::uint64_t gamma_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace runcons
