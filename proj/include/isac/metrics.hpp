#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace isac {

/// Per-AP beamforming matrices F_i (antennas x (users + 1)). Column 0 is the
/// sensing stream, column k the stream of user k.
struct BeamformerSet {
  std::vector<CMat> F;

  std::size_t n_tx() const noexcept { return F.size(); }
  /// f_k stacked over all APs.
  CVec stacked_column(std::size_t stream) const;
  static BeamformerSet zeros(std::size_t n_tx, std::size_t antennas, std::size_t users);
};

struct MetricsReport {
  std::vector<double> sinr;
  double rate = 0.0;
  double sensing_snr = 0.0;
  std::vector<double> ap_power;
  bool sensing_ok = false;
  bool power_ok = false;

  double max_ap_power() const;
};

/// gamma_k = |h_k^H f_k|^2 / (sum_{m != k} |h_k^H f_m|^2 + |h_k^H f_0|^2 + sigma2_k).
std::vector<double> sinr_per_user(const ChannelSet& channels, const BeamformerSet& bf,
                                  std::span<const double> sigma2);

/// sum_k log2(1 + gamma_k). Throws std::invalid_argument on negative input.
double sum_rate(std::span<const double> sinrs);

/// sum_j sum_i chi2[i,j] ||Atilde_{i,j} F_i||_F^2 / sum_j xi2[j].
double sensing_snr(const ChannelSet& channels, const BeamformerSet& bf, std::span<const double> chi2,
                   std::span<const double> xi2);

std::vector<double> per_ap_power(const BeamformerSet& bf);

/// Scales every F_i with ||F_i||_F^2 > p_max down to power p_max; others are
/// returned untouched. Idempotent.
BeamformerSet power_projection(BeamformerSet bf, double p_max);

/// All quantities for one sample; the power flag allows p_max * (1 + 1e-9).
MetricsReport evaluate_metrics(const SystemConfig& config, const ChannelSet& channels, const BeamformerSet& bf);

/// Monte-Carlo estimate of sum_j E||A_j x||^2 / sum_j xi2[j] with
/// lambda_{i,j} ~ CN(0, chi2[i,j]) and unit-power independent streams s.
double mc_sensing_snr(const ChannelSet& channels, const BeamformerSet& bf, std::span<const double> chi2,
                      std::span<const double> xi2, std::size_t trials, std::uint64_t seed);

/// Regular (phi, theta) grid: phi over [-pi, pi], theta over [0, pi], both
/// endpoints included. A single point along an axis sits at phi = 0 or
/// theta = pi / 2.
struct AngleGrid {
  std::vector<double> phi;
  std::vector<double> theta;
};
AngleGrid make_angle_grid(std::size_t n_phi, std::size_t n_theta);

/// Gains |a(phi, theta)^H f_{i,k}|^2 on a grid; points are ordered phi-major
/// (index p * n_theta + t).
struct BeamPattern {
  AngleGrid grid;
  std::vector<double> total;
  /// per_stream[k][point]
  std::vector<std::vector<double>> per_stream;
};
BeamPattern beam_pattern(const CMat& F_i, const AngleGrid& grid, std::size_t m_v, std::size_t m_h);

}  // namespace isac
