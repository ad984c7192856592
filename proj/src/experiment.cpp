#include "isac/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "isac/dataset.hpp"
#include "isac/errors.hpp"
#include "isac/fileio.hpp"

namespace isac {

namespace {

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ExperimentConfig default_experiment(std::string_view profile) {
  ExperimentConfig e;
  e.profile = std::string(profile);
  e.system = profile_by_name(profile);
  return e;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j, std::string_view profile) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  try {
    ExperimentConfig e = default_experiment(j.value("profile", std::string(profile)));
    for (const auto& [key, _] : j.items()) {
      if (key != "profile" && key != "system" && key != "train" && key != "gnn" && key != "baseline") {
        throw ConfigError("experiment config: unknown section '" + key + "'");
      }
    }
    if (j.contains("system")) e.system = system_config_from_json(j["system"], e.system);
    if (j.contains("train")) {
      const auto& t = j["train"];
      TrainConfig& c = e.train;
      c.learning_rate = t.value("learning_rate", c.learning_rate);
      c.rho = t.value("rho", c.rho);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.max_epochs = t.value("max_epochs", c.max_epochs);
      c.patience = t.value("patience", c.patience);
      c.seed = t.value("seed", c.seed);
      c.validation_fraction = t.value("validation_fraction", c.validation_fraction);
      c.checkpoint_every = t.value("checkpoint_every", c.checkpoint_every);
      c.validate();
    }
    if (j.contains("gnn")) {
      const auto& g = j["gnn"];
      GnnHyperparams& h = e.gnn;
      h.layers = g.value("layers", h.layers);
      h.hidden = g.value("hidden", h.hidden);
      h.heads = g.value("heads", h.heads);
      h.init_scale = g.value("init_scale", h.init_scale);
      h.seed = g.value("seed", h.seed);
      h.bias = g.value("bias", h.bias);
      h.validate();
    }
    if (j.contains("baseline")) {
      const auto& b = j["baseline"];
      NsRzfOptions& o = e.baseline;
      o.alpha_scale = b.value("alpha_scale", o.alpha_scale);
      o.per_ap = b.value("per_ap", o.per_ap);
      if (b.contains("search")) o.search = kappa_search_from_string(b["search"].get<std::string>());
      o.fixed_kappa = b.value("fixed_kappa", o.fixed_kappa);
      if (!(o.alpha_scale >= 0.0)) throw ConfigError("baseline.alpha_scale must be >= 0");
      if (!(o.fixed_kappa >= 0.0 && o.fixed_kappa <= 1.0)) throw ConfigError("baseline.fixed_kappa must be in [0, 1]");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("experiment config: ") + ex.what());
  }
}

ExperimentConfig load_experiment(const std::string& path, std::string_view profile) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return experiment_from_json(j, profile);
}

nlohmann::ordered_json to_json(const ExperimentConfig& e) {
  nlohmann::ordered_json j;
  j["profile"] = e.profile;
  j["system"] = to_json(e.system);
  const TrainConfig& t = e.train;
  j["train"] = {{"learning_rate", t.learning_rate}, {"rho", t.rho},
                {"batch_size", t.batch_size},       {"max_epochs", t.max_epochs},
                {"patience", t.patience},           {"seed", t.seed},
                {"validation_fraction", t.validation_fraction}};
  const GnnHyperparams& g = e.gnn;
  j["gnn"] = {{"layers", g.layers},         {"hidden", g.hidden}, {"heads", g.heads},
              {"init_scale", g.init_scale}, {"seed", g.seed},     {"bias", g.bias}};
  const NsRzfOptions& b = e.baseline;
  j["baseline"] = {{"alpha_scale", b.alpha_scale},
                   {"per_ap", b.per_ap},
                   {"search", b.search == KappaSearch::bisection ? "bisection" : "fixed"},
                   {"fixed_kappa", b.fixed_kappa}};
  return j;
}

std::string experiment_hash(const ExperimentConfig& e) {
  nlohmann::ordered_json j = to_json(e);
  j.erase("profile");
  return hash_hex(fnv1a64(j.dump()));
}

std::string artifact_comment(std::string_view config_hash, std::string_view extra) {
  std::string s = "# config_hash=" + std::string(config_hash) + " tool_version=" + kToolVersion;
  if (!extra.empty()) s += " " + std::string(extra);
  return s + "\n";
}

std::string format_eval_csv(const std::vector<ReportRow>& rows, std::string_view config_hash, bool baseline_columns,
                            std::string_view extra) {
  std::string out = artifact_comment(config_hash, extra);
  out += "method,idx,rate,sensing_snr,snr_feasible,p_ap_max";
  if (baseline_columns) out += ",kappa,feasible,nullspace_dim";
  out += "\n";
  std::vector<std::string> methods;
  for (const ReportRow& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    out += r.method + "," + std::to_string(r.idx) + "," + g17(r.metrics.rate) + "," + g17(r.metrics.sensing_snr) +
           "," + (r.metrics.sensing_ok ? "1" : "0") + "," + g17(r.metrics.max_ap_power());
    if (baseline_columns) {
      out += ",";
      if (r.kappa) out += g17(*r.kappa);
      out += ",";
      if (r.feasible) out += *r.feasible ? "1" : "0";
      out += ",";
      if (r.nullspace_dim) out += std::to_string(*r.nullspace_dim);
    }
    out += "\n";
  }
  for (const std::string& m : methods) {
    std::vector<SampleEvaluation> subset;
    for (const ReportRow& r : rows) {
      if (r.method == m) subset.push_back({r.idx, r.metrics});
    }
    const EvalSummary s = summarize(subset);
    out += "# aggregate method=" + m + " n=" + std::to_string(s.n) + " mean_rate=" + g17(s.mean_rate) +
           " median_rate=" + g17(s.median_rate) + " mean_snr=" + g17(s.mean_snr) +
           " snr_feasible_fraction=" + g17(s.snr_feasible_fraction) + " max_ap_power=" + g17(s.max_ap_power) + "\n";
  }
  return out;
}

std::string format_sweep_csv(const std::vector<SweepPoint>& points, std::string_view config_hash,
                             std::string_view param) {
  std::string out = artifact_comment(config_hash, "param=" + std::string(param));
  out += "param_value,method,mean_rate,violation_rate\n";
  for (const SweepPoint& p : points) {
    out += g17(p.param_value) + "," + p.method + "," + g17(p.mean_rate) + "," + g17(p.violation_rate) + "\n";
  }
  return out;
}

std::string format_beam_pattern_csv(const BeamPattern& pattern, std::string_view config_hash) {
  std::string out = artifact_comment(config_hash);
  out += "phi,theta,gain_total";
  for (std::size_t k = 0; k < pattern.per_stream.size(); ++k) {
    out += k == 0 ? ",gain_s0" : ",gain_u" + std::to_string(k);
  }
  out += "\n";
  const std::size_t nt = pattern.grid.theta.size();
  char buf[64];
  for (std::size_t p = 0; p < pattern.grid.phi.size(); ++p) {
    for (std::size_t t = 0; t < nt; ++t) {
      const std::size_t i = p * nt + t;
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", pattern.grid.phi[p], pattern.grid.theta[t]);
      out += buf;
      out += "," + g17(pattern.total[i]);
      for (const auto& s : pattern.per_stream) out += "," + g17(s[i]);
      out += "\n";
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_grid(std::string_view spec) {
  const auto x = spec.find('x');
  auto num = [&](std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
      throw ConfigError("grid must look like 181x91, got '" + std::string(spec) + "'");
    }
    return v;
  };
  if (x == std::string_view::npos) throw ConfigError("grid must look like 181x91, got '" + std::string(spec) + "'");
  return {num(spec.substr(0, x)), num(spec.substr(x + 1))};
}

std::vector<std::pair<std::size_t, std::size_t>> local_maxima(const std::vector<double>& v, std::size_t n_phi,
                                                              std::size_t n_theta) {
  if (v.size() != n_phi * n_theta) throw std::invalid_argument("local_maxima: grid size mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t p = 0; p < n_phi; ++p) {
    for (std::size_t t = 0; t < n_theta; ++t) {
      const double c = v[p * n_theta + t];
      bool is_max = true;
      for (int dp = -1; dp <= 1 && is_max; ++dp) {
        for (int dt = -1; dt <= 1 && is_max; ++dt) {
          if (dp == 0 && dt == 0) continue;
          const long tt = static_cast<long>(t) + dt;
          if (tt < 0 || tt >= static_cast<long>(n_theta)) continue;
          const std::size_t pp = (p + n_phi + static_cast<std::size_t>(dp + 1) - 1) % n_phi;
          if (v[pp * n_theta + static_cast<std::size_t>(tt)] > c) is_max = false;
        }
      }
      if (is_max) out.emplace_back(p, t);
    }
  }
  return out;
}

}  // namespace isac
