#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qa/tensor.hpp"

namespace qa {

/// Adam moments and hyperparameters. The moment buffers are allocated on
/// the first step and must then keep matching the parameter shapes.
struct AdamState {
  std::size_t step_count = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace qa
