#include "isac/rng.hpp"

#include <cmath>
#include <numbers>

namespace isac {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master + (index + 1) * kGolden);
}

std::uint64_t SplitMix64::next() noexcept {
  state_ += kGolden;
  return mix64(state_);
}

double SplitMix64::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::complex<double> SplitMix64::complex_gaussian(double variance) noexcept {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  const double s = std::sqrt(variance / 2.0);
  return {r * std::cos(a) * s, r * std::sin(a) * s};
}

std::uint64_t SplitMix64::below(std::uint64_t n) noexcept {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

}  // namespace isac
