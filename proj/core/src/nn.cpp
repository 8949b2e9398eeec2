#include "qa/nn.hpp"

#include <cmath>

namespace qa {

std::vector<Parameter*> raw_params(const ParamList& list) {
  std::vector<Parameter*> out;
  out.reserve(list.size());
  for (const auto& np : list) out.push_back(np.param);
  return out;
}

Tensor truncated_normal(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values) {
    double x = dist(rng);
    while (std::abs(x) > 2.0 * stddev) x = dist(rng);
    v = x;
  }
  return t;
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = Parameter(truncated_normal({in, out}, kInitStd, rng));
  l.bias = Parameter(Tensor(Shape{out}, 0.0));
  return l;
}

Var Linear::apply(Tape& tape, Var x) { return add(matmul(x, tape.param(weight)), tape.param(bias)); }

void Linear::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

LayerNormParams LayerNormParams::init(std::size_t dim) {
  return LayerNormParams{Parameter(Tensor(Shape{dim}, 1.0)), Parameter(Tensor(Shape{dim}, 0.0))};
}

Var LayerNormParams::apply(Tape& tape, Var x, double eps) {
  return layer_norm(x, tape.param(gain), tape.param(bias), eps);
}

void LayerNormParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

}  // namespace qa
