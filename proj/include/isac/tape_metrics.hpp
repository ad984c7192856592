#pragma once

#include <cstddef>
#include <vector>

#include "isac/ad/tensor.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"
#include "isac/metrics.hpp"

namespace isac {

/// Stacked beamformer as two real (n_tx * M) x (K + 1) tensors; row i * M + m
/// is antenna m of AP i, column 0 the sensing stream.
struct TapeBeamformer {
  ad::Tensor re;
  ad::Tensor im;
};

/// Real/imaginary parts of one sample's channels plus the operating-point
/// constants, as untracked tensors.
struct ChannelConstants {
  std::size_t n_tx = 0, n_rx = 0, antennas = 0, users = 0;
  ad::Tensor h_re, h_im;                 // (n_tx * M) x K
  std::vector<ad::Tensor> a_re, a_im;    // [i * n_rx + j], M x M
  std::vector<double> chi2;              // [i * n_rx + j]
  ad::Tensor sigma2;                     // K x 1
  double xi2_sum = 0.0;
  ad::Tensor signal_mask;                // K x (K + 1), 1 at (k, k + 1)
};

ChannelConstants channel_constants(const SystemConfig& config, const ChannelSet& channels);

TapeBeamformer to_tape(const BeamformerSet& bf);
BeamformerSet from_tape(const TapeBeamformer& bf, std::size_t n_tx);

/// Differentiable power_projection: every AP block is multiplied by
/// sqrt(p_max) / sqrt(p_max + relu(P_i - p_max)), which is exactly 1 for
/// feasible blocks and sqrt(p_max / P_i) otherwise.
TapeBeamformer tape_power_projection(const TapeBeamformer& bf, double p_max, std::size_t n_tx);

struct TapeMetrics {
  ad::Tensor sinr;         // K x 1
  ad::Tensor rate;         // 1 x 1, bits/s/Hz
  ad::Tensor sensing_snr;  // 1 x 1
};

TapeMetrics tape_metrics(const ChannelConstants& c, const TapeBeamformer& bf);

}  // namespace isac
