#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qa/tensor.hpp"

namespace qa {

/// The single seeded generator type behind every stochastic choice.
using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Parameter* param;
};
using ParamList = std::vector<NamedParam>;

std::vector<Parameter*> raw_params(const ParamList& list);

/// Normal(0, stddev) truncated at +-2 stddev by rejection.
Tensor truncated_normal(Shape shape, double stddev, Rng& rng);

inline constexpr double kInitStd = 0.02;

/// y = x W + b with W stored [in x out].
struct Linear {
  Parameter weight;
  Parameter bias;

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  Var apply(Tape& tape, Var x);
  void collect(ParamList& out, const std::string& prefix);
};

struct LayerNormParams {
  Parameter gain;
  Parameter bias;

  static LayerNormParams init(std::size_t dim);
  Var apply(Tape& tape, Var x, double eps = 1e-12);
  void collect(ParamList& out, const std::string& prefix);
};

}  // namespace qa
