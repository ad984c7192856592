#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isac/baseline.hpp"
#include "isac/config.hpp"
#include "isac/metrics.hpp"
#include "isac/sacgnn.hpp"
#include "isac/training.hpp"

namespace isac {

/// Everything that determines the numbers an experiment produces.
struct ExperimentConfig {
  std::string profile = "desk";
  SystemConfig system = desk_profile();
  TrainConfig train;
  GnnHyperparams gnn;
  NsRzfOptions baseline;
};

ExperimentConfig default_experiment(std::string_view profile);

/// Reads {"profile", "system", "train", "gnn", "baseline"}; every section and
/// field is optional. "profile" in the document wins over `profile`.
ExperimentConfig experiment_from_json(const nlohmann::json& j, std::string_view profile);
ExperimentConfig load_experiment(const std::string& path, std::string_view profile);

/// Canonical form; thread count and checkpoint paths are left out because they
/// never change results.
nlohmann::ordered_json to_json(const ExperimentConfig& e);
std::string experiment_hash(const ExperimentConfig& e);

/// `# config_hash=<h> tool_version=<v>[ key=value...]`
std::string artifact_comment(std::string_view config_hash, std::string_view extra = {});

/// One evaluated sample of one method; baseline fields are set for NS-RZF rows.
struct ReportRow {
  std::string method;
  std::size_t idx = 0;
  MetricsReport metrics;
  std::optional<double> kappa;
  std::optional<bool> feasible;
  std::optional<std::size_t> nullspace_dim;
};

/// Long-format CSV: comment line, header
/// method,idx,rate,sensing_snr,snr_feasible,p_ap_max[,kappa,feasible,nullspace_dim],
/// rows, then one "# aggregate" line per method (in order of first appearance).
std::string format_eval_csv(const std::vector<ReportRow>& rows, std::string_view config_hash,
                            bool baseline_columns, std::string_view extra = {});

struct SweepPoint {
  double param_value = 0.0;
  std::string method;
  double mean_rate = 0.0;
  double violation_rate = 0.0;
};
std::string format_sweep_csv(const std::vector<SweepPoint>& points, std::string_view config_hash,
                             std::string_view param);

/// phi,theta,gain_total,gain_s0,gain_u1,... with angles to 6 decimals.
std::string format_beam_pattern_csv(const BeamPattern& pattern, std::string_view config_hash);

/// "RxC" grid spec such as 181x91; throws ConfigError.
std::pair<std::size_t, std::size_t> parse_grid(std::string_view spec);

/// Local maxima of a phi-major grid (8-neighbourhood, phi wraps around, ties
/// count as maxima), as (phi index, theta index).
std::vector<std::pair<std::size_t, std::size_t>> local_maxima(const std::vector<double>& values, std::size_t n_phi,
                                                              std::size_t n_theta);

}  // namespace isac
