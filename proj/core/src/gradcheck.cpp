#include "qa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace qa {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), floor);
}

GradCheckResult compare_gradients(const std::function<double()>& loss, std::span<Parameter* const> params, double h,
                                  double floor) {
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.values[i];
      p.value.values[i] = saved + h;
      const double up = loss();
      p.value.values[i] = saved - h;
      const double down = loss();
      p.value.values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad.values[i];
      const double err = relative_error(analytic, numeric, floor);
      ++res.checked;
      if (err > res.max_rel_error || res.checked == 1) {
        res.max_rel_error = err;
        res.worst_param = k;
        res.worst_index = i;
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

GradCheckResult grad_check(const std::function<Var(Tape&)>& build_loss, std::span<Parameter* const> params, double h,
                           double floor) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  auto eval = [&build_loss]() {
    Tape tape;
    return build_loss(tape).value().item();
  };
  return compare_gradients(eval, params, h, floor);
}

}  // namespace qa
