// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cachenet {

// Counter-based PRNG: output i is a pure function of (seed, stream, i), so a
// replay with the same seed reproduces every draw bit-for-bit no matter how
// components interleave.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed ^ ((stream + 1) * 0xD1B54A32D192ED03ULL)) {}

  std::uint64_t next_u64() { return mix(seed_, counter_++); }

  // Uniform in [0, 1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal, Box-Muller, one cached spare.
  float next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_uniform();
    } while (u1 <= 0.0);
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = static_cast<float>(r * std::sin(a));
    have_spare_ = true;
    return static_cast<float>(r * std::cos(a));
  }

  // Uniform integer in [0, n), n > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + counter * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  float spare_ = 0.0f;
  bool have_spare_ = false;
};

}  // namespace cachenet
