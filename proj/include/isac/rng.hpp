#pragma once

#include <complex>
#include <cstdint>

namespace isac {

/// SplitMix64 output finaliser.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Seed of stream `index` under `master`: the (index + 1)-th SplitMix64 output
/// for state `master`, i.e. mix64(master + (index + 1) * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// SplitMix64 generator with the sampling primitives every dataset and
/// initialisation routine uses. The exact draw order is part of the dataset
/// format, so these must stay stable:
///   uniform()            (next() >> 11) * 2^-53, in [0, 1)
///   complex_gaussian(v)  Box-Muller on u1 = 1 - uniform(), u2 = uniform();
///                        r = sqrt(-2 ln u1); re = r cos(2 pi u2) sqrt(v/2),
///                        im = r sin(2 pi u2) sqrt(v/2)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Circularly-symmetric complex Gaussian, zero mean, E|z|^2 = variance.
  std::complex<double> complex_gaussian(double variance) noexcept;
  /// Integer in [0, n) by rejection (unbiased); n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t state_;
};

}  // namespace isac
