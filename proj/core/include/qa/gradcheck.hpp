#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "qa/tensor.hpp"

namespace qa {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;

  bool passed(double tol) const { return max_rel_error <= tol; }
};

/// Relative error |analytic - numeric| / max(|numeric|, floor). The floor
/// keeps near-zero gradients from turning truncation noise into large ratios.
double relative_error(double analytic, double numeric, double floor);

inline constexpr double kGradCheckFloor = 1e-5;

/// Compares each parameter's current `grad` against central differences of
/// `loss` (which must be a pure function of the parameter values).
GradCheckResult compare_gradients(const std::function<double()>& loss, std::span<Parameter* const> params,
                                  double h = 1e-4, double floor = kGradCheckFloor);

/// Builds the loss on a fresh tape, backpropagates, then compares against
/// central differences. Parameter grads are zeroed first.
GradCheckResult grad_check(const std::function<Var(Tape&)>& build_loss, std::span<Parameter* const> params,
                           double h = 1e-4, double floor = kGradCheckFloor);

}  // namespace qa
