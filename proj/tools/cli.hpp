#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qa/gradcheck.hpp"
#include "qa/span_model.hpp"

namespace qa::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs one command. `args` excludes the program name. Results go to `out`,
/// the resolved config and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

struct ModelGradCheck {
  GradCheckResult result;
  std::string worst_name;
};

/// Finite-difference check of every parameter of a freshly initialized model
/// on one random packed input of `seq_len` positions (the last `pad` padded).
ModelGradCheck model_grad_check(ModelConfig cfg, std::size_t vocab_size, std::size_t seq_len, std::size_t pad,
                                std::uint64_t seed, double h);

}  // namespace qa::cli
