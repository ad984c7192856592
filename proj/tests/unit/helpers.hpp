#pragma once

#include <cstdint>
#include <vector>

#include "isac/ad/adam.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"
#include "isac/rng.hpp"

namespace isac::test {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  SplitMix64 rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline CMat random_cmat(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  CMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.complex_gaussian(1.0);
  }
  return m;
}

inline ad::Parameter make_param(const char* name, ad::Shape shape, std::uint64_t seed) {
  return {name, shape, std::make_shared<std::vector<double>>(random_values(shape.size(), seed))};
}

/// One transmit AP, one receive AP, M = 2 (1 x 2 UPA), one user.
inline SystemConfig minimal_config() {
  SystemConfig c = desk_profile();
  c.n_tx = 1;
  c.n_rx = 1;
  c.m_v = 1;
  c.m_h = 2;
  c.users = 1;
  c.tx_positions = {{0.0, 100.0, 20.0}};
  c.rx_positions = {{100.0, 0.0, 20.0}};
  c.zeta2 = {0.5};
  c.chi2 = {0.1};
  c.sigma2 = {1.0};
  c.xi2 = {1.0};
  c.p_max = 10.0;
  c.gamma_min = 2.0;
  c.validate();
  return c;
}

}  // namespace isac::test
