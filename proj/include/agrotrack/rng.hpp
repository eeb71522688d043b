#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace agrotrack::rng {

/// SplitMix64 step. Used to expand seeds and to hash stream keys, never as
/// the simulation generator itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stateless full-avalanche finalizer (the SplitMix64 output function).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named substreams. Each (seed, entity, tag) triple owns an independent
/// generator, so adding nodes or subsystems never perturbs existing draws.
enum class Stream : std::uint64_t {
  kPlacement = 1,
  kPhase = 2,
  kMobility = 3,
  kShadowing = 4,
  kTxOffset = 5,
  kSlot = 6,
  kMicroslot = 7,
  kDecode = 8,
  kSensor = 9,
  kEpisode = 10,
  kAnalytics = 11,
};

/// xoshiro256** (Blackman/Vigna). 64-bit state space, cheap, and portable:
/// the same seed yields the same sequence on every platform.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
    for (int i = 0; i < 8; ++i) next_u64();  // decouple early output from the seed words
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

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) {
      next_u64();  // keep consumption identical for degenerate ranges
      return 0;
    }
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal draw (Box-Muller, cached spare).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Hash (seed, entity, tag) into a substream seed. Every stage runs through
/// the full avalanche so nearby ids land in unrelated streams.
inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t entity_id, Stream tag) {
  std::uint64_t h = mix64(base_seed);
  h = mix64(h ^ (0x6a09e667f3bcc909ULL + entity_id));
  h = mix64(h ^ (0xbb67ae8584caa73bULL + static_cast<std::uint64_t>(tag)));
  return h;
}

inline Xoshiro256 substream(std::uint64_t base_seed, std::uint64_t entity_id, Stream tag) {
  return Xoshiro256(stream_seed(base_seed, entity_id, tag));
}

}  // namespace agrotrack::rng
