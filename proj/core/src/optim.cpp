#include "qa/optim.hpp"

#include <cmath>

namespace qa {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.m.empty() && state.v.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Tensor::zeros_like(p->value));
      state.v.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    if (p.grad.shape != p.value.shape || state.m[k].shape != p.value.shape || state.v[k].shape != p.value.shape) {
      throw ShapeError("adam_step: parameter " + shape_str(p.value.shape) + " vs grad " + shape_str(p.grad.shape) +
                       " / moments " + shape_str(state.m[k].shape));
    }
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state.m[k].values;
    auto& v = state.v[k].values;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.values[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value.values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace qa
