#include "isac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "isac/rng.hpp"

namespace isac {

namespace {

void check_shapes(const ChannelSet& ch, const BeamformerSet& bf, const char* op) {
  if (bf.n_tx() != ch.n_tx) throw std::invalid_argument(std::string(op) + ": beamformer AP count mismatch");
  for (const CMat& F : bf.F) {
    if (static_cast<std::size_t>(F.rows()) != ch.antennas || static_cast<std::size_t>(F.cols()) != ch.users + 1) {
      throw std::invalid_argument(std::string(op) + ": F_i must be antennas x (users + 1)");
    }
  }
}

}  // namespace

CVec BeamformerSet::stacked_column(std::size_t stream) const {
  const Eigen::Index m = F.empty() ? 0 : F.front().rows();
  CVec out(static_cast<Eigen::Index>(F.size()) * m);
  for (std::size_t i = 0; i < F.size(); ++i) {
    out.segment(static_cast<Eigen::Index>(i) * m, m) = F[i].col(static_cast<Eigen::Index>(stream));
  }
  return out;
}

BeamformerSet BeamformerSet::zeros(std::size_t n_tx, std::size_t antennas, std::size_t users) {
  BeamformerSet bf;
  bf.F.assign(n_tx, CMat::Zero(static_cast<Eigen::Index>(antennas), static_cast<Eigen::Index>(users + 1)));
  return bf;
}

double MetricsReport::max_ap_power() const {
  return ap_power.empty() ? 0.0 : *std::max_element(ap_power.begin(), ap_power.end());
}

std::vector<double> sinr_per_user(const ChannelSet& ch, const BeamformerSet& bf, std::span<const double> sigma2) {
  check_shapes(ch, bf, "sinr_per_user");
  if (sigma2.size() != ch.users) throw std::invalid_argument("sinr_per_user: sigma2 size mismatch");
  const CMat H = ch.stacked_h();
  std::vector<CVec> f;
  for (std::size_t s = 0; s <= ch.users; ++s) f.push_back(bf.stacked_column(s));
  std::vector<double> out(ch.users);
  for (std::size_t k = 0; k < ch.users; ++k) {
    const CVec hk = H.col(static_cast<Eigen::Index>(k));
    double signal = 0.0;
    double interference = 0.0;
    for (std::size_t s = 0; s <= ch.users; ++s) {
      const double g = std::norm(hk.dot(f[s]));  // dot() conjugates hk
      if (s == k + 1) {
        signal = g;
      } else {
        interference += g;
      }
    }
    out[k] = signal / (interference + sigma2[k]);
  }
  return out;
}

double sum_rate(std::span<const double> sinrs) {
  double r = 0.0;
  for (double g : sinrs) {
    if (g < 0.0) throw std::invalid_argument("sum_rate: negative SINR");
    r += std::log2(1.0 + g);
  }
  return r;
}

double sensing_snr(const ChannelSet& ch, const BeamformerSet& bf, std::span<const double> chi2,
                   std::span<const double> xi2) {
  check_shapes(ch, bf, "sensing_snr");
  if (chi2.size() != ch.n_tx * ch.n_rx || xi2.size() != ch.n_rx) {
    throw std::invalid_argument("sensing_snr: chi2/xi2 size mismatch");
  }
  double num = 0.0;
  for (std::size_t j = 0; j < ch.n_rx; ++j) {
    for (std::size_t i = 0; i < ch.n_tx; ++i) {
      num += chi2[i * ch.n_rx + j] * (ch.atilde_at(i, j) * bf.F[i]).squaredNorm();
    }
  }
  double den = 0.0;
  for (double x : xi2) den += x;
  return num / den;
}

std::vector<double> per_ap_power(const BeamformerSet& bf) {
  std::vector<double> out;
  out.reserve(bf.F.size());
  for (const CMat& F : bf.F) out.push_back(F.squaredNorm());
  return out;
}

BeamformerSet power_projection(BeamformerSet bf, double p_max) {
  if (!(p_max > 0.0)) throw std::invalid_argument("power_projection: p_max must be > 0");
  for (CMat& F : bf.F) {
    const double p = F.squaredNorm();
    // The slack keeps a second projection from rescaling by a rounding error.
    if (p > p_max * (1.0 + 1e-12)) F *= std::sqrt(p_max / p);
  }
  return bf;
}

MetricsReport evaluate_metrics(const SystemConfig& config, const ChannelSet& ch, const BeamformerSet& bf) {
  MetricsReport r;
  r.sinr = sinr_per_user(ch, bf, config.sigma2);
  r.rate = sum_rate(r.sinr);
  r.sensing_snr = sensing_snr(ch, bf, config.chi2, config.xi2);
  r.ap_power = per_ap_power(bf);
  r.sensing_ok = r.sensing_snr >= config.gamma_min;
  r.power_ok = r.max_ap_power() <= config.p_max * (1.0 + 1e-9);
  return r;
}

double mc_sensing_snr(const ChannelSet& ch, const BeamformerSet& bf, std::span<const double> chi2,
                      std::span<const double> xi2, std::size_t trials, std::uint64_t seed) {
  check_shapes(ch, bf, "mc_sensing_snr");
  if (trials == 0) throw std::invalid_argument("mc_sensing_snr: trials must be >= 1");
  SplitMix64 rng(seed);
  const auto m = static_cast<Eigen::Index>(ch.antennas);
  const auto streams = static_cast<Eigen::Index>(ch.users + 1);
  std::vector<CVec> x(ch.n_tx);
  CVec s(streams);
  CVec y(m);
  double acc = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (Eigen::Index k = 0; k < streams; ++k) s(k) = rng.complex_gaussian(1.0);
    for (std::size_t i = 0; i < ch.n_tx; ++i) x[i] = bf.F[i] * s;
    for (std::size_t j = 0; j < ch.n_rx; ++j) {
      y.setZero();
      for (std::size_t i = 0; i < ch.n_tx; ++i) {
        const cplx lambda = rng.complex_gaussian(chi2[i * ch.n_rx + j]);
        y.noalias() += lambda * (ch.atilde_at(i, j) * x[i]);
      }
      acc += y.squaredNorm();
    }
  }
  double den = 0.0;
  for (double v : xi2) den += v;
  return acc / static_cast<double>(trials) / den;
}

AngleGrid make_angle_grid(std::size_t n_phi, std::size_t n_theta) {
  if (n_phi == 0 || n_theta == 0) throw std::invalid_argument("make_angle_grid: grid must be non-empty");
  auto axis = [](std::size_t n, double lo, double hi, double mid) {
    std::vector<double> v(n);
    if (n == 1) {
      v[0] = mid;
      return v;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
  };
  return {axis(n_phi, -std::numbers::pi, std::numbers::pi, 0.0),
          axis(n_theta, 0.0, std::numbers::pi, std::numbers::pi / 2)};
}

BeamPattern beam_pattern(const CMat& F_i, const AngleGrid& grid, std::size_t m_v, std::size_t m_h) {
  if (grid.phi.empty() || grid.theta.empty()) throw std::invalid_argument("beam_pattern: empty grid");
  if (static_cast<std::size_t>(F_i.rows()) != m_v * m_h) throw std::invalid_argument("beam_pattern: F_i rows != M");
  BeamPattern out;
  out.grid = grid;
  const std::size_t points = grid.phi.size() * grid.theta.size();
  out.total.assign(points, 0.0);
  out.per_stream.assign(static_cast<std::size_t>(F_i.cols()), std::vector<double>(points, 0.0));
  for (std::size_t p = 0; p < grid.phi.size(); ++p) {
    for (std::size_t t = 0; t < grid.theta.size(); ++t) {
      const CVec a = steering(grid.phi[p], grid.theta[t], m_v, m_h);
      const Eigen::RowVectorXcd g = a.adjoint() * F_i;
      const std::size_t idx = p * grid.theta.size() + t;
      for (Eigen::Index k = 0; k < g.size(); ++k) {
        const double gain = std::norm(g(k));
        out.per_stream[static_cast<std::size_t>(k)][idx] = gain;
        out.total[idx] += gain;
      }
    }
  }
  return out;
}

}  // namespace isac
