#pragma once

#include <cmath>
#include <cstdint>

namespace varfilt {

// Counter-based deterministic RNG. Streams are keyed by (seed, stream id),
// so any draw can be regenerated out of order and across threads with
// bit-identical results on every platform (no std::normal_distribution,
// whose output is implementation-defined).
class Rng {
public:
  explicit Rng(std::uint64_t key) : state_(key) {
    // Burn a couple of outputs so nearby keys decorrelate.
    next_u64();
    next_u64();
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t index = 0) {
    std::uint64_t h = seed;
    h = mix(h ^ (0x9e3779b97f4a7c15ULL + stream));
    h = mix(h ^ (0xbf58476d1ce4e5b9ULL + index));
    return h;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in (0, 1), never exactly 0 or 1.
  double next_uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. One draw consumes two uniforms; the
  // sine branch is discarded to keep replay independent of call pairing.
  double next_normal() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace varfilt
