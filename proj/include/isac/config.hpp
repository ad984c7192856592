#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace isac {

using Vec3 = std::array<double, 3>;

struct AreaBounds {
  double x_min = 0.0, x_max = 200.0;
  double y_min = 0.0, y_max = 200.0;
  double z_min = 0.0, z_max = 35.0;
};

/// Scenario constants. Per-link variances are stored densely:
/// zeta2[i * users + k], chi2[i * n_rx + j], sigma2[k], xi2[j].
/// p_max is linear (same unit as the unit noise variance), gamma_min linear.
struct SystemConfig {
  std::size_t n_tx = 2;
  std::size_t n_rx = 2;
  std::size_t m_v = 2;
  std::size_t m_h = 4;
  std::size_t users = 2;
  std::vector<Vec3> tx_positions;
  std::vector<Vec3> rx_positions;
  AreaBounds area;
  std::vector<double> zeta2;
  std::vector<double> chi2;
  std::vector<double> sigma2;
  std::vector<double> xi2;
  double p_max = 1000.0;
  double gamma_min = 15.0;

  std::size_t antennas() const noexcept { return m_v * m_h; }
  double zeta2_at(std::size_t i, std::size_t k) const { return zeta2.at(i * users + k); }
  double chi2_at(std::size_t i, std::size_t j) const { return chi2.at(i * n_rx + j); }

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;
};

double dbm_to_linear(double dbm) noexcept;
double linear_to_dbm(double linear) noexcept;

/// Four APs on the edges of a 200 m x 200 m area, 4x16 UPAs, four users.
SystemConfig paper_profile();
/// Same geometry with 2x4 UPAs and two users.
SystemConfig desk_profile();
/// "paper" or "desk"; throws ConfigError otherwise.
SystemConfig profile_by_name(std::string_view name);

/// Canonical JSON (all variance tables written out in full).
nlohmann::ordered_json to_json(const SystemConfig& config);
/// Accepts scalar or full-table variances and either "p_max" (linear) or
/// "p_max_dbm"; missing fields fall back to `defaults`. Validates the result.
SystemConfig system_config_from_json(const nlohmann::json& j, const SystemConfig& defaults);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hash_hex(std::uint64_t h);

/// Hash of everything that determines dataset contents and model input/output
/// dimensions: counts, positions, area, gain variances zeta2. Operating-point
/// values (noise, chi2, p_max, gamma_min) are excluded so one dataset serves a
/// whole sweep.
std::string scenario_hash(const SystemConfig& config);

}  // namespace isac
