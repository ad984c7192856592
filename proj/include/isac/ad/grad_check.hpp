#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isac/ad/adam.hpp"
#include "isac/ad/tensor.hpp"

namespace isac::ad {

/// Scalar function of the parameters, evaluated either on tape leaves or on
/// constants (for the finite-difference probes).
using ScalarFunction = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckOptions {
  /// Central-difference step is step * (1 + |x|).
  double step = 1e-5;
  /// Accuracy order of the central stencil: 2, 4 or 6 (truncation error
  /// O(h^order)). Higher orders allow a larger step, which keeps cancellation
  /// noise off small gradients.
  int order = 2;
  /// Ridders' extrapolation instead of a fixed stencil. Each run shrinks its
  /// starting step by 1.4 up to 10 times and keeps the tableau entry with the
  /// smallest internal error estimate; runs start at 1, 10 and 100 times
  /// `step` and the most confident estimate wins. `order` is ignored.
  bool ridders = false;
  double tolerance = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-8;
  /// (parameter index, element index) pairs to probe; empty probes all.
  std::vector<std::pair<std::size_t, std::size_t>> probes;
};

struct GradCheckProbe {
  std::size_t param = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<std::string> names;
  /// Max relative error per parameter over its probed entries (0 if none).
  std::vector<double> max_rel_error;
  std::vector<GradCheckProbe> probes;
  double worst = 0.0;
  bool passed = true;
};

GradCheckReport grad_check(const ScalarFunction& f, const ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace isac::ad
