#include "isac/ad/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace isac::ad {

AdamState make_adam_state(const ParameterList& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Parameter& p : params) {
    state.m.emplace_back(p.values->size(), 0.0);
    state.v.emplace_back(p.values->size(), 0.0);
  }
  return state;
}

void adam_step(ParameterList& params, const GradientList& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::size_t n = params[p].values->size();
    if (grads[p].size() != n || state.m[p].size() != n || state.v[p].size() != n) {
      throw std::invalid_argument("adam_step: size mismatch for parameter '" + params[p].name + "'");
    }
    for (double g : grads[p]) {
      if (!std::isfinite(g)) {
        throw std::domain_error("adam_step: non-finite gradient for parameter '" + params[p].name + "'");
      }
    }
  }

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(c.beta1, t);
  const double v_correction = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& w = *params[p].values;
    std::vector<double>& m = state.m[p];
    std::vector<double>& v = state.v[p];
    const std::vector<double>& g = grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / m_correction;
      const double v_hat = v[i] / v_correction;
      w[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

ParameterList clone(const ParameterList& params) {
  ParameterList out;
  out.reserve(params.size());
  for (const Parameter& p : params) {
    out.push_back({p.name, p.shape, std::make_shared<std::vector<double>>(*p.values)});
  }
  return out;
}

}  // namespace isac::ad
