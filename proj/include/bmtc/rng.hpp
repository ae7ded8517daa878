#pragma once

#include <cstdint>
#include <random>

namespace bmtc {

// Seedable pseudorandom generator with a stable cross-platform stream:
// the raw source is std::mt19937_64, whose output sequence is fixed by the
// standard, and the mappings below are implemented explicitly instead of
// going through the (implementation-defined) standard distributions. Used
// for factor initialization, mask sampling and synthetic data, so that
// benchmarks reproduce bit-for-bit on any machine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform double in [0, 1), 53 random mantissa bits.
  double uniform01() { return (gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::mt19937_64 gen_;
};

}  // namespace bmtc
