#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "isac/ad/adam.hpp"
#include "isac/ad/tensor.hpp"
#include "isac/config.hpp"
#include "isac/dataset.hpp"
#include "isac/metrics.hpp"
#include "isac/sacgnn.hpp"

namespace isac {

/// -rate + rho * relu(gamma_min - snr). Exactly -rate when snr >= gamma_min.
ad::Tensor penalty_loss(const ad::Tensor& rate, const ad::Tensor& snr, double gamma_min, double rho);
/// Same with a tensor rho, so d(loss)/d(rho) is available.
ad::Tensor penalty_loss(const ad::Tensor& rate, const ad::Tensor& snr, double gamma_min, const ad::Tensor& rho);

struct TrainConfig {
  double learning_rate = 1e-4;
  double rho = 1.0;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  /// Stop after this many epochs without a validation-loss improvement.
  std::size_t patience = 20;
  std::uint64_t seed = 7;
  /// Fraction of the training split held out (taken from its end) for validation.
  double validation_fraction = 0.1;
  /// Write a checkpoint every N epochs (0 disables); needs checkpoint_dir.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::size_t threads = 1;

  /// Throws ConfigError on learning_rate <= 0, rho < 0, batch_size == 0 or a
  /// validation fraction outside [0, 1).
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_rate = 0.0;
  double train_snr = 0.0;
  double violation_rate = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;

  /// epoch,train_loss,train_rate,train_snr,violation_rate,val_loss,seconds
  std::string to_csv() const;
};

struct TrainResult {
  GnnModel model;  // best-validation weights
  TrainLog log;
  ad::AdamState adam;
};

/// Per-sample objective at the operating point of `config`.
struct SampleObjective {
  double loss = 0.0;
  double rate = 0.0;
  double snr = 0.0;
};

/// Forward pass for one scene; when `grads` is non-null the loss gradient
/// (one array per parameter) is written there.
SampleObjective sample_objective(const GnnModel& model, const SystemConfig& config, const Scene& scene, double rho,
                                 ad::GradientList* grads = nullptr);

/// Indices used for fitting and for validation inside the training split.
struct TrainSplit {
  IndexRange fit;
  IndexRange validation;
};
TrainSplit split_training(const DatasetManifest& manifest, double validation_fraction);

/// Mean per-sample loss over `range`.
double mean_loss(const GnnModel& model, const SystemConfig& config, const Dataset& dataset, IndexRange range,
                 double rho, std::size_t threads = 1);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the penalty loss. `config` supplies the operating point
/// (noise, chi2, p_max, gamma_min) and must describe the dataset's scenario;
/// otherwise HashMismatch is thrown. A non-finite sample loss throws
/// NonFiniteLoss carrying the dataset index.
TrainResult train(GnnModel model, const Dataset& dataset, const SystemConfig& config, const TrainConfig& tc,
                  const EpochCallback& on_epoch = {});

/// Model JSON plus Adam moments and step counter.
void save_checkpoint(const GnnModel& model, const ad::AdamState& adam, const std::filesystem::path& path);
struct Checkpoint {
  GnnModel model;
  ad::AdamState adam;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct SampleEvaluation {
  std::size_t idx = 0;
  MetricsReport metrics;
};

struct EvalSummary {
  std::size_t n = 0;
  double mean_rate = 0.0;
  double median_rate = 0.0;
  double mean_snr = 0.0;
  /// Fraction of samples with sensing SNR >= gamma_min.
  double snr_feasible_fraction = 0.0;
  double max_ap_power = 0.0;
};

EvalSummary summarize(const std::vector<SampleEvaluation>& rows);

struct EvalResult {
  std::vector<SampleEvaluation> rows;
  EvalSummary summary;
};

/// Untracked forward plus metrics for every sample in `range`. Throws
/// HashMismatch when the model was trained on a different scenario.
EvalResult evaluate(const GnnModel& model, const Dataset& dataset, const SystemConfig& config, IndexRange range,
                    std::size_t threads = 1);

}  // namespace isac
