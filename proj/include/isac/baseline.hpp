#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "isac/config.hpp"
#include "isac/geometry.hpp"
#include "isac/metrics.hpp"

namespace isac {

struct RzfDirections {
  /// Unit-norm stacked directions, one per user.
  std::vector<CVec> w;
  /// Set when H is numerically rank deficient (smallest singular value below
  /// 1e-12 of the largest); the regularised solution is still returned.
  bool rank_deficient = false;
};

/// Columns of H (H^H H + alpha I)^-1 normalised to unit norm, with
/// alpha = alpha_scale * K * mean(sigma2) / p_total.
RzfDirections rzf_directions(const CMat& H, std::span<const double> sigma2, double p_total, double alpha_scale = 1.0);

struct NullspaceDirection {
  /// Unit-norm stacked sensing direction, or zero when infeasible.
  CVec f0;
  bool feasible = false;
  std::size_t nullspace_dim = 0;
};

/// Projects the stacked transmit steering vectors towards the target onto the
/// orthogonal complement of span(H). An empty null space or a projection with
/// norm below 1e-9 yields a zero vector and feasible = false.
NullspaceDirection nullspace_sensing_direction(const CMat& H, std::span<const CVec> tx_target);

enum class KappaSearch { bisection, fixed };

struct NsRzfOptions {
  double alpha_scale = 1.0;
  /// Normalise each AP's block separately (true) or the stacked vectors (false,
  /// followed by power_projection).
  bool per_ap = true;
  KappaSearch search = KappaSearch::bisection;
  /// Sensing power fraction used when search == fixed.
  double fixed_kappa = 0.0;
  /// Bisection stops once the bracket is narrower than this.
  double kappa_tolerance = 1e-9;
};

struct NsRzfResult {
  BeamformerSet bf;
  bool feasible = false;
  double kappa = 0.0;
  std::size_t nullspace_dim = 0;
  double sensing_snr = 0.0;
  bool nullspace_feasible = false;
  bool rank_deficient = false;
};

/// Beamformers for a fixed sensing fraction kappa: per AP, kappa * p_max on the
/// sensing column and (1 - kappa) * p_max shared equally by the K user columns.
BeamformerSet ns_rzf_allocate(const ChannelSet& channels, const RzfDirections& rzf, const NullspaceDirection& ns,
                              double kappa, double p_max, bool per_ap = true);

/// Smallest kappa in [0, 1] whose allocation meets gamma_min; kappa = 1 and
/// feasible = false when even full sensing power misses it.
NsRzfResult ns_rzf_beamformer(const SystemConfig& config, const ChannelSet& channels, double gamma_min, double p_max,
                              const NsRzfOptions& options = {});

KappaSearch kappa_search_from_string(std::string_view s);

}  // namespace isac
