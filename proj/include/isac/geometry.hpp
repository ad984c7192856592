#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "isac/config.hpp"

namespace isac {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Vertical UPA factor: element m = exp(-j m pi cos(theta)) / sqrt(m_v).
CVec steering_vertical(double theta, std::size_t m_v);
/// Horizontal UPA factor: element m = exp(-j m pi sin(theta) cos(phi)) / sqrt(m_h).
CVec steering_horizontal(double phi, double theta, std::size_t m_h);
/// Full steering vector b_h(phi, theta) kron b_v(theta); element
/// (m_h_idx * m_v + m_v_idx). Unit norm.
CVec steering(double phi, double theta, std::size_t m_v, std::size_t m_h);

/// Azimuth phi = atan2(dy, dx) in (-pi, pi] and elevation theta measured from
/// +z, theta = acos(dz / r) in [0, pi].
struct Angles {
  double phi = 0.0;
  double theta = 0.0;
};

/// Direction of `to` seen from `from`. Throws std::invalid_argument when the
/// points coincide.
Angles angles_between(const Vec3& from, const Vec3& to);

/// One random realisation of user/target positions and communication gains.
struct Scene {
  std::uint64_t seed = 0;
  std::vector<Vec3> users;
  Vec3 target{};
  /// beta[i * users + k]
  std::vector<cplx> beta;

  cplx beta_at(std::size_t i, std::size_t k) const { return beta.at(i * users.size() + k); }
};

/// Draw order from SplitMix64(seed): for each user x, y, z uniform in the
/// area; then target x, y, z; then beta row-major over (AP i, user k), each
/// CN(0, zeta2[i,k]).
Scene sample_scene(const SystemConfig& config, std::uint64_t seed);

/// Communication vectors h_{i,k} = beta_{i,k} a(phi_{i,k}, theta_{i,k}) and
/// sensing matrices Atilde_{i,j} = a_rx,j a_tx,i^H, plus the target steering
/// vectors they are built from.
struct ChannelSet {
  std::size_t n_tx = 0;
  std::size_t n_rx = 0;
  std::size_t users = 0;
  std::size_t antennas = 0;
  std::vector<CVec> h;        // [i * users + k]
  std::vector<CMat> atilde;   // [i * n_rx + j]
  std::vector<CVec> tx_target;  // a(phi_tx_i, theta_tx_i), AP i -> target
  std::vector<CVec> rx_target;  // a(phi_rx_j, theta_rx_j), target -> AP j

  const CVec& h_at(std::size_t i, std::size_t k) const { return h.at(i * users + k); }
  const CMat& atilde_at(std::size_t i, std::size_t j) const { return atilde.at(i * n_rx + j); }
  /// Stacked channel matrix [h_1 ... h_K], (n_tx * antennas) x users.
  CMat stacked_h() const;
};

/// Transmit angles point from AP i towards the user or target; receive angles
/// point from the target towards receive AP j.
ChannelSet build_channels(const SystemConfig& config, const Scene& scene);

}  // namespace isac
