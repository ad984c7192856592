#include "isac/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "isac/errors.hpp"

namespace isac {

namespace {

Eigen::Index idx(std::size_t x) { return static_cast<Eigen::Index>(x); }

}  // namespace

RzfDirections rzf_directions(const CMat& H, std::span<const double> sigma2, double p_total, double alpha_scale) {
  const std::size_t K = static_cast<std::size_t>(H.cols());
  if (sigma2.size() != K) throw std::invalid_argument("rzf_directions: sigma2 size mismatch");
  if (!(p_total > 0.0)) throw std::invalid_argument("rzf_directions: p_total must be > 0");
  RzfDirections out;
  if (K == 0) return out;
  double mean_noise = 0.0;
  for (double s : sigma2) mean_noise += s;
  mean_noise /= static_cast<double>(K);
  const double alpha = alpha_scale * static_cast<double>(K) * mean_noise / p_total;

  // H = U S V^H gives H (H^H H + alpha I)^-1 = U diag(s / (s^2 + alpha)) V^H.
  Eigen::JacobiSVD<CMat> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  out.rank_deficient = s.size() < idx(K) || s(s.size() - 1) <= 1e-12 * s(0);
  Eigen::VectorXd d(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    d(i) = (s(i) * s(i) + alpha) > 0.0 ? s(i) / (s(i) * s(i) + alpha) : 0.0;
  }
  const CMat W = svd.matrixU() * d.asDiagonal() * svd.matrixV().adjoint();
  for (std::size_t k = 0; k < K; ++k) {
    const CVec col = W.col(idx(k));
    const double n = col.norm();
    out.w.push_back(n > 0.0 ? CVec(col / n) : CVec(CVec::Zero(col.size())));
  }
  return out;
}

NullspaceDirection nullspace_sensing_direction(const CMat& H, std::span<const CVec> tx_target) {
  std::size_t n = 0;
  for (const CVec& a : tx_target) n += static_cast<std::size_t>(a.size());
  if (static_cast<std::size_t>(H.rows()) != n) {
    throw std::invalid_argument("nullspace_sensing_direction: H rows do not match stacked steering length");
  }
  CVec a_bar(idx(n));
  std::size_t offset = 0;
  for (const CVec& a : tx_target) {
    a_bar.segment(idx(offset), a.size()) = a;
    offset += static_cast<std::size_t>(a.size());
  }
  NullspaceDirection out;
  CVec projected = a_bar;
  std::size_t rank = 0;
  if (H.cols() > 0) {
    Eigen::JacobiSVD<CMat> svd(H, Eigen::ComputeThinU);
    const Eigen::VectorXd s = svd.singularValues();
    const double tol = std::max<double>(static_cast<double>(n), static_cast<double>(H.cols())) *
                       std::numeric_limits<double>::epsilon() * (s.size() > 0 ? s(0) : 0.0);
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > tol ? 1 : 0;
    const CMat Ur = svd.matrixU().leftCols(idx(rank));
    projected = a_bar - Ur * (Ur.adjoint() * a_bar);
  }
  out.nullspace_dim = n - rank;
  const double norm = projected.norm();
  if (out.nullspace_dim == 0 || norm < 1e-9) {
    out.f0 = CVec::Zero(idx(n));
    out.feasible = false;
    return out;
  }
  out.f0 = projected / norm;
  out.feasible = true;
  return out;
}

BeamformerSet ns_rzf_allocate(const ChannelSet& ch, const RzfDirections& rzf, const NullspaceDirection& ns,
                              double kappa, double p_max, bool per_ap) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("ns_rzf_allocate: kappa must be in [0, 1]");
  if (rzf.w.size() != ch.users) throw std::invalid_argument("ns_rzf_allocate: need one RZF direction per user");
  const auto M = idx(ch.antennas);
  BeamformerSet bf = BeamformerSet::zeros(ch.n_tx, ch.antennas, ch.users);
  const double users = static_cast<double>(ch.users);
  auto place = [&](std::size_t stream, const CVec& stacked, double power) {
    if (per_ap) {
      for (std::size_t i = 0; i < ch.n_tx; ++i) {
        const CVec block = stacked.segment(idx(i) * M, M);
        const double n = block.norm();
        if (n > 0.0) bf.F[i].col(idx(stream)) = std::sqrt(power) / n * block;
      }
      return;
    }
    const double n = stacked.norm();
    if (n == 0.0) return;
    const double scale = std::sqrt(power * static_cast<double>(ch.n_tx)) / n;
    for (std::size_t i = 0; i < ch.n_tx; ++i) bf.F[i].col(idx(stream)) = scale * stacked.segment(idx(i) * M, M);
  };
  place(0, ns.f0, kappa * p_max);
  for (std::size_t k = 0; k < ch.users; ++k) place(k + 1, rzf.w[k], (1.0 - kappa) * p_max / users);
  return per_ap ? bf : power_projection(std::move(bf), p_max);
}

NsRzfResult ns_rzf_beamformer(const SystemConfig& config, const ChannelSet& ch, double gamma_min, double p_max,
                              const NsRzfOptions& opt) {
  const CMat H = ch.stacked_h();
  const RzfDirections rzf = rzf_directions(H, config.sigma2, static_cast<double>(ch.n_tx) * p_max, opt.alpha_scale);
  const NullspaceDirection ns = nullspace_sensing_direction(H, ch.tx_target);
  NsRzfResult out;
  out.nullspace_dim = ns.nullspace_dim;
  out.nullspace_feasible = ns.feasible;
  out.rank_deficient = rzf.rank_deficient;
  auto snr_at = [&](double kappa) {
    return sensing_snr(ch, ns_rzf_allocate(ch, rzf, ns, kappa, p_max, opt.per_ap), config.chi2, config.xi2);
  };
  auto finish = [&](double kappa) {
    out.kappa = kappa;
    out.bf = ns_rzf_allocate(ch, rzf, ns, kappa, p_max, opt.per_ap);
    out.sensing_snr = sensing_snr(ch, out.bf, config.chi2, config.xi2);
    out.feasible = out.sensing_snr >= gamma_min;
    return out;
  };
  if (opt.search == KappaSearch::fixed) return finish(opt.fixed_kappa);
  if (snr_at(0.0) >= gamma_min) return finish(0.0);
  if (snr_at(1.0) < gamma_min) return finish(1.0);
  double lo = 0.0;  // infeasible
  double hi = 1.0;  // feasible
  while (hi - lo > opt.kappa_tolerance) {
    const double mid = 0.5 * (lo + hi);
    (snr_at(mid) >= gamma_min ? hi : lo) = mid;
  }
  return finish(hi);
}

KappaSearch kappa_search_from_string(std::string_view s) {
  if (s == "bisection") return KappaSearch::bisection;
  if (s == "fixed") return KappaSearch::fixed;
  throw ConfigError("unknown kappa search '" + std::string(s) + "' (expected bisection or fixed)");
}

}  // namespace isac
