#include "isac/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "isac/ad/ops.hpp"
#include "isac/errors.hpp"
#include "isac/fileio.hpp"
#include "isac/hetgraph.hpp"
#include "isac/parallel.hpp"
#include "isac/rng.hpp"
#include "isac/tape_metrics.hpp"

namespace isac {

using ad::Tensor;

Tensor penalty_loss(const Tensor& rate, const Tensor& snr, double gamma_min, double rho) {
  return penalty_loss(rate, snr, gamma_min, Tensor::scalar(rho));
}

Tensor penalty_loss(const Tensor& rate, const Tensor& snr, double gamma_min, const Tensor& rho) {
  const Tensor deficit = ad::relu(ad::sub(Tensor::scalar(gamma_min), snr));
  return ad::add(ad::neg(rate), ad::mul(rho, deficit));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (!(rho >= 0.0)) throw ConfigError("train: rho must be >= 0");
  if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train: validation fraction must be in [0, 1)");
  }
  if (checkpoint_every > 0 && checkpoint_dir.empty()) throw ConfigError("train: checkpoints need a directory");
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_loss,train_rate,train_snr,violation_rate,val_loss,seconds\n";
  char buf[512];
  for (const EpochRecord& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n", e.epoch, e.train_loss, e.train_rate,
                  e.train_snr, e.violation_rate, e.val_loss, e.seconds);
    out += buf;
  }
  return out;
}

SampleObjective sample_objective(const GnnModel& model, const SystemConfig& config, const Scene& scene, double rho,
                                 ad::GradientList* grads) {
  const ChannelSet ch = build_channels(config, scene);
  const HeteroGraph graph = build_graph(config, ch);
  const ChannelConstants constants = channel_constants(config, ch);
  SampleObjective out;
  if (!grads) {
    const std::vector<Tensor> w = as_constants(model.params);
    const TapeMetrics m = tape_metrics(constants, forward(model, w, graph, config.p_max));
    out.rate = m.rate.item();
    out.snr = m.sensing_snr.item();
    out.loss = penalty_loss(m.rate, m.sensing_snr, config.gamma_min, rho).item();
    return out;
  }
  ad::Tape tape;
  const std::vector<Tensor> w = as_leaves(model.params, tape);
  const TapeMetrics m = tape_metrics(constants, forward(model, w, graph, config.p_max));
  const Tensor loss = penalty_loss(m.rate, m.sensing_snr, config.gamma_min, rho);
  out.rate = m.rate.item();
  out.snr = m.sensing_snr.item();
  out.loss = loss.item();
  if (!std::isfinite(out.loss)) return out;
  tape.backward(loss);
  grads->resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) (*grads)[i] = tape.grad(w[i]);
  return out;
}

TrainSplit split_training(const DatasetManifest& manifest, double validation_fraction) {
  const IndexRange train = manifest.train;
  const std::size_t n = train.size();
  std::size_t n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = n > 0 ? n - 1 : 0;
  return {{train.begin, train.end - n_val}, {train.end - n_val, train.end}};
}

double mean_loss(const GnnModel& model, const SystemConfig& config, const Dataset& dataset, IndexRange range,
                 double rho, std::size_t threads) {
  if (range.size() == 0) return 0.0;
  std::vector<double> losses(range.size());
  parallel_for(range.size(), threads, [&](std::size_t i) {
    losses[i] = sample_objective(model, config, dataset.scenes.at(range.begin + i), rho).loss;
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(range.size());
}

namespace {

void check_scenario(const Dataset& dataset, const SystemConfig& config) {
  const std::string h = scenario_hash(config);
  if (h != dataset.manifest.config_hash) {
    throw HashMismatch("configuration scenario hash " + h + " does not match dataset hash " +
                       dataset.manifest.config_hash);
  }
}

void add_into(ad::GradientList& acc, const ad::GradientList& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (std::size_t p = 0; p < acc.size(); ++p) {
    for (std::size_t i = 0; i < acc[p].size(); ++i) acc[p][i] += g[p][i];
  }
}

nlohmann::ordered_json moments_json(const ad::ParameterList& params, const ad::GradientList& m) {
  auto out = nlohmann::ordered_json::object();
  for (std::size_t p = 0; p < params.size(); ++p) out[params[p].name] = m[p];
  return out;
}

}  // namespace

TrainResult train(GnnModel model, const Dataset& dataset, const SystemConfig& config, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
  tc.validate();
  config.validate();
  check_scenario(dataset, config);
  if (!(model.dims == graph_dims(config))) throw ConfigError("train: model dimensions do not match the scenario");
  const TrainSplit split = split_training(dataset.manifest, tc.validation_fraction);
  if (split.fit.size() == 0) throw ConfigError("train: training split is empty");

  // Parameters share buffers on copy; train on a private set.
  model.params = ad::clone(model.params);
  model.config_hash = dataset.manifest.config_hash;
  ad::AdamState adam = ad::make_adam_state(model.params, {tc.learning_rate});
  TrainResult result{model, {}, adam};
  result.model.params = ad::clone(model.params);
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::vector<std::size_t> order(split.fit.size());
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), split.fit.begin);
    SplitMix64 shuffle_rng(derive_seed(tc.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t violations = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + tc.batch_size);
      const std::size_t bs = b1 - b0;
      std::vector<SampleObjective> obj(bs);
      std::vector<ad::GradientList> per_sample(bs);
      parallel_for(bs, tc.threads, [&](std::size_t s) {
        obj[s] = sample_objective(model, config, dataset.scenes[order[b0 + s]], tc.rho, &per_sample[s]);
      });
      ad::GradientList total;
      for (std::size_t s = 0; s < bs; ++s) {
        if (!std::isfinite(obj[s].loss)) throw NonFiniteLoss(order[b0 + s], obj[s].loss);
        add_into(total, per_sample[s]);
        rec.train_loss += obj[s].loss;
        rec.train_rate += obj[s].rate;
        rec.train_snr += obj[s].snr;
        violations += obj[s].snr < config.gamma_min ? 1 : 0;
      }
      const double inv = 1.0 / static_cast<double>(bs);
      for (auto& g : total) {
        for (double& x : g) x *= inv;
      }
      ad::adam_step(model.params, total, adam);
    }
    const double n = static_cast<double>(order.size());
    rec.train_loss /= n;
    rec.train_rate /= n;
    rec.train_snr /= n;
    rec.violation_rate = static_cast<double>(violations) / n;
    // Without a validation split the training loss selects the model.
    rec.val_loss = split.validation.size() > 0
                       ? mean_loss(model, config, dataset, split.validation, tc.rho, tc.threads)
                       : mean_loss(model, config, dataset, split.fit, tc.rho, tc.threads);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best) {
      best = rec.val_loss;
      result.log.best_epoch = epoch;
      result.log.best_val_loss = best;
      result.model.params = ad::clone(model.params);
      stale = 0;
    } else {
      ++stale;
    }
    if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%04zu.json", epoch);
      save_checkpoint(model, adam, tc.checkpoint_dir / name);
    }
    if (stale >= tc.patience) break;
  }
  result.adam = std::move(adam);
  return result;
}

void save_checkpoint(const GnnModel& model, const ad::AdamState& adam, const std::filesystem::path& path) {
  nlohmann::ordered_json j = model_to_json(model);
  j["adam"] = {{"learning_rate", adam.config.learning_rate},
               {"beta1", adam.config.beta1},
               {"beta2", adam.config.beta2},
               {"epsilon", adam.config.epsilon},
               {"step", adam.step},
               {"m", moments_json(model.params, adam.m)},
               {"v", moments_json(model.params, adam.v)}};
  write_file_atomic(path, j.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  GnnModel model = load_model(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    const auto& a = j.at("adam");
    ad::AdamState adam = ad::make_adam_state(
        model.params,
        {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
         a.at("epsilon").get<double>()});
    adam.step = a.at("step").get<std::uint64_t>();
    for (std::size_t p = 0; p < model.params.size(); ++p) {
      adam.m[p] = a.at("m").at(model.params[p].name).get<std::vector<double>>();
      adam.v[p] = a.at("v").at(model.params[p].name).get<std::vector<double>>();
      if (adam.m[p].size() != model.params[p].values->size() || adam.v[p].size() != adam.m[p].size()) {
        throw IoError(path.string() + ": Adam moments for " + model.params[p].name + " have the wrong size");
      }
    }
    return {std::move(model), std::move(adam)};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

EvalSummary summarize(const std::vector<SampleEvaluation>& rows) {
  EvalSummary s;
  s.n = rows.size();
  if (rows.empty()) return s;
  std::vector<double> rates;
  std::size_t feasible = 0;
  for (const SampleEvaluation& r : rows) {
    rates.push_back(r.metrics.rate);
    s.mean_rate += r.metrics.rate;
    s.mean_snr += r.metrics.sensing_snr;
    feasible += r.metrics.sensing_ok ? 1 : 0;
    s.max_ap_power = std::max(s.max_ap_power, r.metrics.max_ap_power());
  }
  const double n = static_cast<double>(rows.size());
  s.mean_rate /= n;
  s.mean_snr /= n;
  s.snr_feasible_fraction = static_cast<double>(feasible) / n;
  std::sort(rates.begin(), rates.end());
  const std::size_t mid = rates.size() / 2;
  s.median_rate = rates.size() % 2 ? rates[mid] : 0.5 * (rates[mid - 1] + rates[mid]);
  return s;
}

EvalResult evaluate(const GnnModel& model, const Dataset& dataset, const SystemConfig& config, IndexRange range,
                    std::size_t threads) {
  if (model.config_hash != dataset.manifest.config_hash) {
    throw HashMismatch("model was trained for scenario " + model.config_hash + ", dataset is " +
                       dataset.manifest.config_hash);
  }
  check_scenario(dataset, config);
  if (range.end > dataset.scenes.size() || range.begin > range.end) throw ConfigError("evaluate: range out of bounds");
  EvalResult out;
  out.rows.resize(range.size());
  parallel_for(range.size(), threads, [&](std::size_t i) {
    const std::size_t idx = range.begin + i;
    const ChannelSet ch = build_channels(config, dataset.scenes[idx]);
    const BeamformerSet bf = infer(model, build_graph(config, ch), config.p_max);
    out.rows[i] = {idx, evaluate_metrics(config, ch, bf)};
  });
  out.summary = summarize(out.rows);
  return out;
}

}  // namespace isac
