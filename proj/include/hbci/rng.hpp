#pragma once

#include <cstdint>
#include <random>

namespace hbci {

// Portable seeded generator. std::mt19937_64's output is fixed by the
// standard; the conversions below avoid the implementation-defined
// std::*_distribution classes so draws match on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n), rejection-sampled to stay unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (one cached spare).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finaliser over (seed, stream): independent sub-seeds for the
// flash scheduler, phase draws and per-channel noise.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hbci
