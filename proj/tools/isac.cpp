// Command-line front end: gen, train, eval, sweep, beampattern.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isac/baseline.hpp"
#include "isac/dataset.hpp"
#include "isac/errors.hpp"
#include "isac/experiment.hpp"
#include "isac/fileio.hpp"
#include "isac/hetgraph.hpp"
#include "isac/parallel.hpp"
#include "isac/sacgnn.hpp"
#include "isac/training.hpp"

namespace fs = std::filesystem;
using namespace isac;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNonFinite = 4;
constexpr int kExitHash = 5;
constexpr int kExitMissingModel = 6;

class MissingModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::size_t threads = 1;
  std::string profile = "desk";
};

std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("ISAC_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("ISAC_SEED is not an unsigned integer: ") + env);
    return v;
  }
  return flag;
}

ExperimentConfig experiment(const std::string& path, const Globals& g) {
  ExperimentConfig e = path.empty() ? default_experiment(g.profile) : load_experiment(path, g.profile);
  e.train.threads = g.threads;
  return e;
}

/// Operating point stored with a trained model.
SystemConfig model_system(const GnnModel& model) {
  if (!model.metadata.contains("system")) throw ConfigError("model has no recorded system configuration");
  return system_config_from_json(model.metadata["system"], desk_profile());
}

IndexRange split_range(const Dataset& ds, const std::string& split) {
  if (split == "test") return ds.manifest.test;
  if (split == "train") return ds.manifest.train;
  if (split == "all") return {0, ds.scenes.size()};
  throw ConfigError("unknown split '" + split + "' (expected test, train or all)");
}

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

fs::path sweep_model_path(const fs::path& dir, const std::string& param, double value) {
  return dir / (param + "_" + fmt_value(value) + ".json");
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad sweep value '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("sweep needs at least one value");
  return out;
}

/// Sets the swept parameter on a copy of the system configuration. p_max
/// values are in dBm.
SystemConfig with_param(SystemConfig c, const std::string& param, double value) {
  if (param == "gamma_min") {
    c.gamma_min = value;
  } else if (param == "p_max") {
    c.p_max = dbm_to_linear(value);
  } else {
    throw ConfigError("unknown sweep parameter '" + param + "' (expected gamma_min or p_max)");
  }
  c.validate();
  return c;
}

GnnModel run_training(const ExperimentConfig& e, const Dataset& ds, const fs::path& out, const fs::path& log_path,
                      bool quiet) {
  GnnModel model = init_model(e.gnn, graph_dims(e.system));
  TrainConfig tc = e.train;
  const TrainResult r = train(model, ds, e.system, tc, [&](const EpochRecord& rec) {
    if (!quiet) {
      std::fprintf(stderr, "epoch %zu loss %.4f rate %.4f snr %.3f violation %.3f val %.4f (%.1fs)\n", rec.epoch,
                   rec.train_loss, rec.train_rate, rec.train_snr, rec.violation_rate, rec.val_loss, rec.seconds);
    }
  });
  GnnModel trained = r.model;
  trained.metadata = nlohmann::ordered_json::object();
  trained.metadata["experiment_hash"] = experiment_hash(e);
  trained.metadata["tool_version"] = kToolVersion;
  trained.metadata["system"] = to_json(e.system);
  trained.metadata["train"] = to_json(e)["train"];
  trained.metadata["best_epoch"] = r.log.best_epoch;
  trained.metadata["best_val_loss"] = r.log.best_val_loss;
  trained.metadata["epochs_run"] = r.log.epochs.size();
  save_model(trained, out);
  fs::path lp = log_path.empty() ? fs::path(out.string() + ".log.csv") : log_path;
  write_file_atomic(lp, artifact_comment(trained.config_hash, "experiment_hash=" + experiment_hash(e)) +
                            r.log.to_csv());
  return trained;
}

std::vector<ReportRow> baseline_rows(const Dataset& ds, const SystemConfig& sys, const NsRzfOptions& opt,
                                     IndexRange range, std::size_t threads) {
  std::vector<ReportRow> rows(range.size());
  parallel_for(range.size(), threads, [&](std::size_t i) {
    const std::size_t idx = range.begin + i;
    const ChannelSet ch = build_channels(sys, ds.scenes[idx]);
    const NsRzfResult r = ns_rzf_beamformer(sys, ch, sys.gamma_min, sys.p_max, opt);
    rows[i] = {"ns-rzf", idx, evaluate_metrics(sys, ch, r.bf), r.kappa, r.feasible, r.nullspace_dim};
  });
  return rows;
}

std::vector<ReportRow> model_rows(const GnnModel& model, const Dataset& ds, const SystemConfig& sys, IndexRange range,
                                  std::size_t threads) {
  const EvalResult ev = evaluate(model, ds, sys, range, threads);
  std::vector<ReportRow> rows;
  for (const SampleEvaluation& s : ev.rows) rows.push_back({"sacgnn", s.idx, s.metrics, {}, {}, {}});
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free ISAC beamforming experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--profile", g.profile, "Default scenario profile")->check(CLI::IsMember({"paper", "desk"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  std::string gen_config, gen_out;
  long long gen_n = 2000;
  std::uint64_t gen_seed = 42;
  gen->add_option("--config", gen_config, "Experiment config JSON");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n", gen_n, "Number of samples");
  gen->add_option("--seed", gen_seed, "Master seed");

  // train
  auto* tr = app.add_subcommand("train", "Train SACGNN on a dataset");
  std::string tr_config, tr_data, tr_out, tr_log;
  std::optional<double> tr_rho, tr_lr, tr_gamma, tr_pmax_dbm;
  std::optional<std::size_t> tr_epochs, tr_batch, tr_ckpt;
  std::optional<std::uint64_t> tr_seed;
  bool tr_quiet = false;
  tr->add_option("--config", tr_config, "Experiment config JSON");
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Model file")->required();
  tr->add_option("--log", tr_log, "Training log CSV (default <out>.log.csv)");
  tr->add_option("--rho", tr_rho, "Penalty coefficient");
  tr->add_option("--lr", tr_lr, "Adam learning rate");
  tr->add_option("--epochs", tr_epochs, "Maximum epochs");
  tr->add_option("--batch", tr_batch, "Batch size");
  tr->add_option("--seed", tr_seed, "Training seed (shuffling and initialisation)");
  tr->add_option("--gamma-min", tr_gamma, "Sensing SNR target (linear)");
  tr->add_option("--p-max-dbm", tr_pmax_dbm, "Per-AP power budget in dBm");
  tr->add_option("--checkpoint-every", tr_ckpt, "Checkpoint cadence in epochs");
  tr->add_flag("--quiet", tr_quiet, "No per-epoch progress");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a model and/or the NS-RZF baseline");
  std::string ev_model, ev_data, ev_split = "test", ev_report, ev_baseline, ev_config;
  ev->add_option("--model", ev_model, "Model file");
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--split", ev_split, "test, train or all");
  ev->add_option("--report", ev_report, "CSV report path")->required();
  ev->add_option("--baseline", ev_baseline, "Also evaluate a baseline")->check(CLI::IsMember({"ns-rzf"}));
  ev->add_option("--config", ev_config, "Experiment config (operating point when no model is given)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Evaluate one trained model per parameter value");
  std::string sw_param, sw_values, sw_config, sw_data, sw_models, sw_report;
  bool sw_train = false, sw_quiet = false;
  sw->add_option("--param", sw_param, "gamma_min or p_max (dBm)")->required();
  sw->add_option("--values", sw_values, "Comma-separated values")->required();
  sw->add_option("--config", sw_config, "Experiment config JSON");
  sw->add_option("--data", sw_data, "Dataset directory")->required();
  sw->add_option("--models", sw_models, "Directory of <param>_<value>.json models")->required();
  sw->add_option("--report", sw_report, "Curve CSV path")->required();
  sw->add_flag("--train-missing", sw_train, "Train models that do not exist yet");
  sw->add_flag("--quiet", sw_quiet, "No per-epoch progress");

  // beampattern
  auto* bp = app.add_subcommand("beampattern", "Export a transmit-AP beam pattern");
  std::string bp_model, bp_scene, bp_grid = "181x91", bp_out;
  std::size_t bp_ap = 1;
  bp->add_option("--model", bp_model, "Model file")->required();
  bp->add_option("--scene", bp_scene, "Scene JSON with users and target")->required();
  bp->add_option("--ap", bp_ap, "Transmit AP (1-based)");
  bp->add_option("--grid", bp_grid, "PHIxTHETA points");
  bp->add_option("--out", bp_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      if (gen_n <= 0) throw ConfigError("--n must be >= 1");
      const ExperimentConfig e = experiment(gen_config, g);
      const Dataset ds =
          dataset_generate(e.system, static_cast<std::size_t>(gen_n), effective_seed(gen_seed), gen_out, 0.8, g.threads);
      std::printf("dataset %s: %zu samples (train %zu, test %zu), config_hash %s, seed %llu\n", gen_out.c_str(),
                  ds.manifest.n_samples, ds.manifest.train.size(), ds.manifest.test.size(),
                  ds.manifest.config_hash.c_str(), static_cast<unsigned long long>(ds.manifest.master_seed));
      const GraphDims d = graph_dims(e.system);
      std::printf("graph: %zu tAP + %zu rAP + %zu UE nodes, %zu edges\n", d.count(NodeType::tap),
                  d.count(NodeType::rap), d.count(NodeType::ue), d.edge_count());
    } else if (*tr) {
      ExperimentConfig e = experiment(tr_config, g);
      if (tr_rho) e.train.rho = *tr_rho;
      if (tr_lr) e.train.learning_rate = *tr_lr;
      if (tr_epochs) e.train.max_epochs = *tr_epochs;
      if (tr_batch) e.train.batch_size = *tr_batch;
      if (tr_ckpt) {
        e.train.checkpoint_every = *tr_ckpt;
        e.train.checkpoint_dir = fs::path(tr_out).parent_path() / (fs::path(tr_out).stem().string() + "_checkpoints");
      }
      if (tr_seed || std::getenv("ISAC_SEED")) {
        e.train.seed = effective_seed(tr_seed.value_or(e.train.seed));
        e.gnn.seed = e.train.seed;
      }
      if (tr_gamma) e.system.gamma_min = *tr_gamma;
      if (tr_pmax_dbm) e.system.p_max = dbm_to_linear(*tr_pmax_dbm);
      e.system.validate();
      e.train.validate();
      const Dataset ds = load_dataset(tr_data);
      const GnnModel m = run_training(e, ds, tr_out, tr_log, tr_quiet);
      std::printf("model %s: best epoch %s, validation loss %.6f\n", tr_out.c_str(),
                  m.metadata["best_epoch"].dump().c_str(), m.metadata["best_val_loss"].get<double>());
    } else if (*ev) {
      const Dataset ds = load_dataset(ev_data);
      const IndexRange range = split_range(ds, ev_split);
      std::vector<ReportRow> rows;
      SystemConfig sys;
      NsRzfOptions opt;
      std::string extra = "split=" + ev_split;
      if (!ev_config.empty()) opt = experiment(ev_config, g).baseline;
      if (!ev_model.empty()) {
        const GnnModel model = load_model(ev_model);
        sys = model_system(model);
        rows = model_rows(model, ds, sys, range, g.threads);
        extra += " experiment_hash=" + model.metadata.value("experiment_hash", std::string());
      } else {
        if (ev_baseline.empty()) throw ConfigError("eval needs --model, --baseline or both");
        sys = ev_config.empty() ? ds.manifest.config : experiment(ev_config, g).system;
        if (scenario_hash(sys) != ds.manifest.config_hash) {
          throw HashMismatch("config scenario does not match dataset " + ds.manifest.config_hash);
        }
      }
      if (!ev_baseline.empty()) {
        const auto b = baseline_rows(ds, sys, opt, range, g.threads);
        rows.insert(rows.end(), b.begin(), b.end());
      }
      const std::string csv = format_eval_csv(rows, ds.manifest.config_hash, !ev_baseline.empty(), extra);
      write_file_atomic(ev_report, csv);
      std::istringstream lines(csv);
      for (std::string line; std::getline(lines, line);) {
        if (line.rfind("# aggregate", 0) == 0) std::printf("%s\n", line.c_str() + 2);
      }
    } else if (*sw) {
      const std::vector<double> values = parse_values(sw_values);
      ExperimentConfig e = experiment(sw_config, g);
      for (double v : values) with_param(e.system, sw_param, v);  // validate all values before any work
      const Dataset ds = load_dataset(sw_data);
      std::vector<SweepPoint> points;
      for (double v : values) {
        const fs::path path = sweep_model_path(sw_models, sw_param, v);
        ExperimentConfig ev_cfg = e;
        ev_cfg.system = with_param(e.system, sw_param, v);
        GnnModel model;
        if (fs::exists(path)) {
          model = load_model(path);
        } else if (sw_train) {
          model = run_training(ev_cfg, ds, path, {}, sw_quiet);
        } else {
          throw MissingModel("no model for " + sw_param + "=" + fmt_value(v) + " at " + path.string());
        }
        const SystemConfig sys = with_param(model_system(model), sw_param, v);
        const EvalResult r = evaluate(model, ds, sys, ds.manifest.test, g.threads);
        points.push_back({v, "sacgnn", r.summary.mean_rate, 1.0 - r.summary.snr_feasible_fraction});
        const auto b = baseline_rows(ds, sys, e.baseline, ds.manifest.test, g.threads);
        double rate = 0.0;
        std::size_t infeasible = 0;
        for (const ReportRow& row : b) {
          rate += row.metrics.rate;
          infeasible += row.feasible.value_or(false) ? 0 : 1;
        }
        const double n = static_cast<double>(b.size());
        points.push_back({v, "ns-rzf", n > 0 ? rate / n : 0.0, n > 0 ? static_cast<double>(infeasible) / n : 0.0});
        std::printf("%s=%s sacgnn %.4f (violations %.3f) ns-rzf %.4f (infeasible %.3f)\n", sw_param.c_str(),
                    fmt_value(v).c_str(), points[points.size() - 2].mean_rate, points[points.size() - 2].violation_rate,
                    points.back().mean_rate, points.back().violation_rate);
      }
      write_file_atomic(sw_report, format_sweep_csv(points, ds.manifest.config_hash, sw_param));
    } else if (*bp) {
      const GnnModel model = load_model(bp_model);
      const SystemConfig sys = model_system(model);
      if (bp_ap < 1 || bp_ap > sys.n_tx) {
        throw ConfigError("--ap must be in 1.." + std::to_string(sys.n_tx));
      }
      const auto [n_phi, n_theta] = parse_grid(bp_grid);
      nlohmann::json sj;
      try {
        sj = nlohmann::json::parse(read_file(bp_scene));
      } catch (const nlohmann::json::exception& ex) {
        throw IoError(bp_scene + ": " + ex.what());
      }
      const Scene scene = scene_from_json(sj, sys);
      const ChannelSet ch = build_channels(sys, scene);
      const BeamformerSet bf = infer(model, build_graph(sys, ch), sys.p_max);
      const BeamPattern pat = beam_pattern(bf.F[bp_ap - 1], make_angle_grid(n_phi, n_theta), sys.m_v, sys.m_h);
      write_file_atomic(bp_out, format_beam_pattern_csv(pat, model.config_hash));
    }
  } catch (const NonFiniteLoss& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNonFinite;
  } catch (const HashMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitHash;
  } catch (const MissingModel& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingModel;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
