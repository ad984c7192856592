#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "isac/ad/tensor.hpp"

namespace isac::ad {

/// Named learnable array. Values are shared so a tape leaf can alias them
/// without copying; they must not be mutated while a tape referencing them
/// is alive.
struct Parameter {
  std::string name;
  Shape shape;
  std::shared_ptr<std::vector<double>> values;
};

using ParameterList = std::vector<Parameter>;
/// One gradient array per parameter, in ParameterList order.
using GradientList = std::vector<std::vector<double>>;

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  GradientList m;
  GradientList v;
};

/// Zero moments shaped like `params`.
AdamState make_adam_state(const ParameterList& params, AdamConfig config = {});

/// One bias-corrected Adam update, applied in place. If any gradient entry is
/// non-finite nothing is modified and std::domain_error names the parameter.
void adam_step(ParameterList& params, const GradientList& grads, AdamState& state);

/// Deep copy, so the clone owns independent value buffers.
ParameterList clone(const ParameterList& params);

}  // namespace isac::ad
