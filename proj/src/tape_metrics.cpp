#include "isac/tape_metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "isac/ad/ops.hpp"

namespace isac {

using ad::Shape;
using ad::Tensor;

namespace {

void split(const CMat& z, std::vector<double>& re, std::vector<double>& im) {
  re.resize(static_cast<std::size_t>(z.size()));
  im.resize(static_cast<std::size_t>(z.size()));
  std::size_t p = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c, ++p) {
      re[p] = z(r, c).real();
      im[p] = z(r, c).imag();
    }
  }
}

Shape shape_of(const CMat& z) { return {static_cast<std::size_t>(z.rows()), static_cast<std::size_t>(z.cols())}; }

/// (n_tx * M) x n_tx indicator of which AP owns each row.
Tensor block_indicator(std::size_t rows, std::size_t n_tx) {
  const std::size_t m = rows / n_tx;
  std::vector<double> e(rows * n_tx, 0.0);
  for (std::size_t r = 0; r < rows; ++r) e[r * n_tx + r / m] = 1.0;
  return Tensor::constant({rows, n_tx}, std::move(e));
}

}  // namespace

ChannelConstants channel_constants(const SystemConfig& config, const ChannelSet& ch) {
  ChannelConstants c;
  c.n_tx = ch.n_tx;
  c.n_rx = ch.n_rx;
  c.antennas = ch.antennas;
  c.users = ch.users;
  std::vector<double> re, im;
  const CMat h = ch.stacked_h();
  split(h, re, im);
  c.h_re = Tensor::constant(shape_of(h), re);
  c.h_im = Tensor::constant(shape_of(h), im);
  for (const CMat& a : ch.atilde) {
    split(a, re, im);
    c.a_re.push_back(Tensor::constant(shape_of(a), re));
    c.a_im.push_back(Tensor::constant(shape_of(a), im));
  }
  c.chi2 = config.chi2;
  c.sigma2 = Tensor::constant({ch.users, 1}, config.sigma2);
  for (double x : config.xi2) c.xi2_sum += x;
  std::vector<double> mask(ch.users * (ch.users + 1), 0.0);
  for (std::size_t k = 0; k < ch.users; ++k) mask[k * (ch.users + 1) + k + 1] = 1.0;
  c.signal_mask = Tensor::constant({ch.users, ch.users + 1}, std::move(mask));
  return c;
}

TapeBeamformer to_tape(const BeamformerSet& bf) {
  if (bf.F.empty()) throw std::invalid_argument("to_tape: empty beamformer set");
  const auto m = bf.F.front().rows();
  CMat stacked(m * static_cast<Eigen::Index>(bf.F.size()), bf.F.front().cols());
  for (std::size_t i = 0; i < bf.F.size(); ++i) stacked.middleRows(static_cast<Eigen::Index>(i) * m, m) = bf.F[i];
  std::vector<double> re, im;
  split(stacked, re, im);
  return {Tensor::constant(shape_of(stacked), re), Tensor::constant(shape_of(stacked), im)};
}

BeamformerSet from_tape(const TapeBeamformer& bf, std::size_t n_tx) {
  if (n_tx == 0 || bf.re.rows() % n_tx != 0 || bf.re.shape() != bf.im.shape()) {
    throw std::invalid_argument("from_tape: inconsistent beamformer shape");
  }
  const std::size_t m = bf.re.rows() / n_tx;
  const std::size_t cols = bf.re.cols();
  BeamformerSet out;
  for (std::size_t i = 0; i < n_tx; ++i) {
    CMat F(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        F(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {bf.re(i * m + r, c), bf.im(i * m + r, c)};
      }
    }
    out.F.push_back(std::move(F));
  }
  return out;
}

TapeBeamformer tape_power_projection(const TapeBeamformer& bf, double p_max, std::size_t n_tx) {
  if (!(p_max > 0.0)) throw std::invalid_argument("tape_power_projection: p_max must be > 0");
  const std::size_t rows = bf.re.rows();
  if (n_tx == 0 || rows % n_tx != 0) throw std::invalid_argument("tape_power_projection: rows not divisible by n_tx");
  const Tensor e = block_indicator(rows, n_tx);
  const Tensor row_power = ad::add(ad::sum(ad::square(bf.re), 1), ad::sum(ad::square(bf.im), 1));
  const Tensor ap_power = ad::matmul(ad::transpose(e), row_power);  // n_tx x 1
  const Tensor excess = ad::relu(ad::shift(ap_power, -p_max));
  const Tensor factor = ad::div(Tensor::scalar(std::sqrt(p_max)), ad::sqrt(ad::shift(excess, p_max)));
  const Tensor row_factor = ad::matmul(e, factor);  // rows x 1
  return {ad::mul(bf.re, row_factor), ad::mul(bf.im, row_factor)};
}

TapeMetrics tape_metrics(const ChannelConstants& c, const TapeBeamformer& bf) {
  const Shape want{c.n_tx * c.antennas, c.users + 1};
  if (bf.re.shape() != want || bf.im.shape() != want) {
    throw std::invalid_argument("tape_metrics: beamformer shape " + ad::to_string(bf.re.shape()) + " expected " +
                                ad::to_string(want));
  }
  // G = H^H F, K x (K + 1).
  const Tensor hre_t = ad::transpose(c.h_re);
  const Tensor him_t = ad::transpose(c.h_im);
  const Tensor g_re = ad::add(ad::matmul(hre_t, bf.re), ad::matmul(him_t, bf.im));
  const Tensor g_im = ad::sub(ad::matmul(hre_t, bf.im), ad::matmul(him_t, bf.re));
  const Tensor gain = ad::add(ad::square(g_re), ad::square(g_im));
  const Tensor signal = ad::sum(ad::mul(gain, c.signal_mask), 1);
  const Tensor interference = ad::sub(ad::sum(gain, 1), signal);
  TapeMetrics out;
  out.sinr = ad::div(signal, ad::add(interference, c.sigma2));
  out.rate = ad::scale(ad::sum(ad::log(ad::shift(out.sinr, 1.0))), 1.0 / std::numbers::ln2);

  Tensor echo = Tensor::scalar(0.0);
  const std::size_t m = c.antennas;
  for (std::size_t i = 0; i < c.n_tx; ++i) {
    const Tensor f_re = ad::slice_rows(bf.re, i * m, (i + 1) * m);
    const Tensor f_im = ad::slice_rows(bf.im, i * m, (i + 1) * m);
    for (std::size_t j = 0; j < c.n_rx; ++j) {
      const Tensor& a_re = c.a_re[i * c.n_rx + j];
      const Tensor& a_im = c.a_im[i * c.n_rx + j];
      const Tensor y_re = ad::sub(ad::matmul(a_re, f_re), ad::matmul(a_im, f_im));
      const Tensor y_im = ad::add(ad::matmul(a_re, f_im), ad::matmul(a_im, f_re));
      const Tensor energy = ad::add(ad::sum(ad::square(y_re)), ad::sum(ad::square(y_im)));
      echo = ad::add(echo, ad::scale(energy, c.chi2[i * c.n_rx + j]));
    }
  }
  out.sensing_snr = ad::scale(echo, 1.0 / c.xi2_sum);
  return out;
}

}  // namespace isac
