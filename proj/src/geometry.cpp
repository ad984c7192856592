#include "isac/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "isac/rng.hpp"

namespace isac {
namespace {

CVec linear_phase(double spatial_freq, std::size_t n, const char* name) {
  if (n < 1) throw std::invalid_argument(std::string(name) + ": array size must be >= 1");
  CVec v(static_cast<Eigen::Index>(n));
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t m = 0; m < n; ++m) {
    v(static_cast<Eigen::Index>(m)) = std::polar(norm, -static_cast<double>(m) * std::numbers::pi * spatial_freq);
  }
  return v;
}

}  // namespace

CVec steering_vertical(double theta, std::size_t m_v) {
  return linear_phase(std::cos(theta), m_v, "steering_vertical");
}

CVec steering_horizontal(double phi, double theta, std::size_t m_h) {
  return linear_phase(std::sin(theta) * std::cos(phi), m_h, "steering_horizontal");
}

CVec steering(double phi, double theta, std::size_t m_v, std::size_t m_h) {
  const CVec bv = steering_vertical(theta, m_v);
  const CVec bh = steering_horizontal(phi, theta, m_h);
  CVec a(static_cast<Eigen::Index>(m_v * m_h));
  for (std::size_t h = 0; h < m_h; ++h) {
    for (std::size_t v = 0; v < m_v; ++v) {
      a(static_cast<Eigen::Index>(h * m_v + v)) = bh(static_cast<Eigen::Index>(h)) * bv(static_cast<Eigen::Index>(v));
    }
  }
  return a;
}

Angles angles_between(const Vec3& from, const Vec3& to) {
  const double dx = to[0] - from[0];
  const double dy = to[1] - from[1];
  const double dz = to[2] - from[2];
  const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (r == 0.0) throw std::invalid_argument("angles_between: coincident points");
  const double c = std::clamp(dz / r, -1.0, 1.0);
  return {std::atan2(dy, dx), std::acos(c)};
}

Scene sample_scene(const SystemConfig& config, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Scene scene;
  scene.seed = seed;
  const AreaBounds& a = config.area;
  auto point = [&] {
    const double x = rng.uniform(a.x_min, a.x_max);
    const double y = rng.uniform(a.y_min, a.y_max);
    const double z = rng.uniform(a.z_min, a.z_max);
    return Vec3{x, y, z};
  };
  scene.users.reserve(config.users);
  for (std::size_t k = 0; k < config.users; ++k) scene.users.push_back(point());
  scene.target = point();
  scene.beta.reserve(config.n_tx * config.users);
  for (std::size_t i = 0; i < config.n_tx; ++i) {
    for (std::size_t k = 0; k < config.users; ++k) scene.beta.push_back(rng.complex_gaussian(config.zeta2_at(i, k)));
  }
  return scene;
}

CMat ChannelSet::stacked_h() const {
  const auto rows = static_cast<Eigen::Index>(n_tx * antennas);
  CMat out(rows, static_cast<Eigen::Index>(users));
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t i = 0; i < n_tx; ++i) {
      out.block(static_cast<Eigen::Index>(i * antennas), static_cast<Eigen::Index>(k),
                static_cast<Eigen::Index>(antennas), 1) = h_at(i, k);
    }
  }
  return out;
}

ChannelSet build_channels(const SystemConfig& config, const Scene& scene) {
  if (scene.users.size() != config.users || scene.beta.size() != config.n_tx * config.users) {
    throw std::invalid_argument("build_channels: scene does not match config dimensions");
  }
  ChannelSet ch;
  ch.n_tx = config.n_tx;
  ch.n_rx = config.n_rx;
  ch.users = config.users;
  ch.antennas = config.antennas();
  auto steer = [&](const Vec3& from, const Vec3& to) {
    const Angles ang = angles_between(from, to);
    return steering(ang.phi, ang.theta, config.m_v, config.m_h);
  };
  for (std::size_t i = 0; i < config.n_tx; ++i) {
    for (std::size_t k = 0; k < config.users; ++k) {
      ch.h.push_back(scene.beta_at(i, k) * steer(config.tx_positions[i], scene.users[k]));
    }
    ch.tx_target.push_back(steer(config.tx_positions[i], scene.target));
  }
  for (std::size_t j = 0; j < config.n_rx; ++j) ch.rx_target.push_back(steer(scene.target, config.rx_positions[j]));
  for (std::size_t i = 0; i < config.n_tx; ++i) {
    for (std::size_t j = 0; j < config.n_rx; ++j) ch.atilde.push_back(ch.rx_target[j] * ch.tx_target[i].adjoint());
  }
  return ch;
}

}  // namespace isac
