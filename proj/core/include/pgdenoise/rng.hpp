#pragma once

#include <array>
#include <cstdint>

namespace pgd {

// Deterministic 64-bit PRNG: xoshiro256++ seeded through SplitMix64.
// Equal seeds give bit-identical sample streams. Substreams for independent
// purposes (cropping, noise sampling, weight init, ...) come from split(),
// which derives a child seed from (seed, stream id); parallel users must
// split rather than share one generator.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);

  // Standard normal via Box-Muller (two uniforms per sample).
  double normal();

  // Exact Poisson sample. Inversion by sequential search for mean < 10,
  // Hormann's PTRS transformed rejection for mean >= 10.
  long poisson(double mean);

  // Independent child generator keyed by (seed, stream).
  Rng split(uint64_t stream) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  std::array<uint64_t, 4> state_{};
};

// Common substream ids, so CLI runs and library callers agree.
namespace streams {
inline constexpr uint64_t kCrop = 1;
inline constexpr uint64_t kNoise = 2;
inline constexpr uint64_t kWeightInit = 3;
inline constexpr uint64_t kAugment = 4;
inline constexpr uint64_t kTexture = 5;
}  // namespace streams

}  // namespace pgd
