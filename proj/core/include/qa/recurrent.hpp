#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "qa/nn.hpp"

namespace qa {

struct LstmWeights {
  // Input weights [in x cell].
  Parameter w_input, w_forget, w_output, w_cell;
  // Recurrent weights [cell x cell].
  Parameter u_input, u_forget, u_output, u_cell;
  // Biases [cell].
  Parameter b_input, b_forget, b_output, b_cell;

  /// Normal(0, 0.02) weights; forget-gate bias 1, other biases 0.
  static LstmWeights init(std::size_t input_dim, std::size_t cell_dim, Rng& rng);
  std::size_t input_dim() const { return w_input.value.rows(); }
  std::size_t cell_dim() const { return w_input.value.cols(); }
  void collect(ParamList& out, const std::string& prefix);
};

enum class OutputActivation { kTanh, kIdentity };

/// Two independent LSTM cells plus the output projection g(W_y [fwd, bwd] + b_y).
struct BiLstmLayer {
  LstmWeights forward;
  LstmWeights backward;
  Parameter w_y;  // [2*cell x out]
  Parameter b_y;  // [out]
  OutputActivation activation = OutputActivation::kTanh;

  static BiLstmLayer init(std::size_t input_dim, std::size_t cell_dim, std::size_t output_dim, Rng& rng,
                          OutputActivation activation = OutputActivation::kTanh);
  void collect(ParamList& out, const std::string& prefix = "bilstm");
};

struct LstmState {
  Var h;
  Var c;
};

/// One cell step on row vectors: x_t [1 x in], h_prev and c_prev [1 x cell].
LstmState lstm_step(Tape& tape, Var x_t, Var h_prev, Var c_prev, LstmWeights& w);

struct BiLstmOutput {
  Var forward;   // [seq x cell]
  Var backward;  // [seq x cell]
};

/// Runs both directions over the unpadded prefix from zero state; padded
/// rows of both outputs are zero. Padding must be a suffix of `pad_mask`.
BiLstmOutput bilstm(Tape& tape, Var sequence, std::span<const int> pad_mask, BiLstmLayer& layer);

Var project(Tape& tape, Var forward, Var backward, BiLstmLayer& layer);

}  // namespace qa
