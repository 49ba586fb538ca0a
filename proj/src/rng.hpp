#pragma once

#include <cstdint>

namespace mhsi {

// xorshift64* (Vigna 2014): state ^= state >> 12; state ^= state << 25;
// state ^= state >> 27; output = state * 0x2545F4914F6CDD1D.
// The seed is scrambled through one splitmix64 step so that seed 0 is valid.
// All library randomness (splits, synthetic scenes, initialization) flows
// through this generator so results are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 24 bits of mantissa.
  float uniform();
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in [0, 1) with 53 bits.
  double uniform_double();
  // Uniform integer in [0, n), n > 0. Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (cosine branch only, one output per call).
  double normal();

 private:
  std::uint64_t state_;
};

}  // namespace mhsi
