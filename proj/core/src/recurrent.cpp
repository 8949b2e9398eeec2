#include "qa/recurrent.hpp"

#include <stdexcept>
#include <vector>

namespace qa {

LstmWeights LstmWeights::init(std::size_t input_dim, std::size_t cell_dim, Rng& rng) {
  LstmWeights w;
  for (Parameter* p : {&w.w_input, &w.w_forget, &w.w_output, &w.w_cell}) {
    *p = Parameter(truncated_normal({input_dim, cell_dim}, kInitStd, rng));
  }
  for (Parameter* p : {&w.u_input, &w.u_forget, &w.u_output, &w.u_cell}) {
    *p = Parameter(truncated_normal({cell_dim, cell_dim}, kInitStd, rng));
  }
  w.b_input = Parameter(Tensor(Shape{cell_dim}, 0.0));
  w.b_forget = Parameter(Tensor(Shape{cell_dim}, 1.0));
  w.b_output = Parameter(Tensor(Shape{cell_dim}, 0.0));
  w.b_cell = Parameter(Tensor(Shape{cell_dim}, 0.0));
  return w;
}

void LstmWeights::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".w_input", &w_input});
  out.push_back({prefix + ".w_forget", &w_forget});
  out.push_back({prefix + ".w_output", &w_output});
  out.push_back({prefix + ".w_cell", &w_cell});
  out.push_back({prefix + ".u_input", &u_input});
  out.push_back({prefix + ".u_forget", &u_forget});
  out.push_back({prefix + ".u_output", &u_output});
  out.push_back({prefix + ".u_cell", &u_cell});
  out.push_back({prefix + ".b_input", &b_input});
  out.push_back({prefix + ".b_forget", &b_forget});
  out.push_back({prefix + ".b_output", &b_output});
  out.push_back({prefix + ".b_cell", &b_cell});
}

BiLstmLayer BiLstmLayer::init(std::size_t input_dim, std::size_t cell_dim, std::size_t output_dim, Rng& rng,
                              OutputActivation activation) {
  BiLstmLayer layer;
  layer.forward = LstmWeights::init(input_dim, cell_dim, rng);
  layer.backward = LstmWeights::init(input_dim, cell_dim, rng);
  layer.w_y = Parameter(truncated_normal({2 * cell_dim, output_dim}, kInitStd, rng));
  layer.b_y = Parameter(Tensor(Shape{output_dim}, 0.0));
  layer.activation = activation;
  return layer;
}

void BiLstmLayer::collect(ParamList& out, const std::string& prefix) {
  forward.collect(out, prefix + ".forward");
  backward.collect(out, prefix + ".backward");
  out.push_back({prefix + ".w_y", &w_y});
  out.push_back({prefix + ".b_y", &b_y});
}

namespace {

// Input projections x W for each gate, precomputed as rows.
struct GateInputs {
  Var input, forget, output, cell;
};

LstmState step_from_inputs(Tape& tape, const GateInputs& x, Var h_prev, Var c_prev, LstmWeights& w) {
  Var i = sigmoid(add(add(x.input, matmul(h_prev, tape.param(w.u_input))), tape.param(w.b_input)));
  Var f = sigmoid(add(add(x.forget, matmul(h_prev, tape.param(w.u_forget))), tape.param(w.b_forget)));
  Var o = sigmoid(add(add(x.output, matmul(h_prev, tape.param(w.u_output))), tape.param(w.b_output)));
  Var g = tanh(add(add(x.cell, matmul(h_prev, tape.param(w.u_cell))), tape.param(w.b_cell)));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

std::vector<Var> run_direction(Tape& tape, Var sequence, std::size_t n, bool reverse, LstmWeights& w) {
  const GateInputs proj{matmul(sequence, tape.param(w.w_input)), matmul(sequence, tape.param(w.w_forget)),
                        matmul(sequence, tape.param(w.w_output)), matmul(sequence, tape.param(w.w_cell))};
  const std::size_t cell = w.cell_dim();
  Var h = tape.constant(Tensor(Shape{1, cell}, 0.0));
  Var c = h;
  std::vector<Var> outputs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    const GateInputs row{slice_rows(proj.input, t, 1), slice_rows(proj.forget, t, 1), slice_rows(proj.output, t, 1),
                         slice_rows(proj.cell, t, 1)};
    LstmState s = step_from_inputs(tape, row, h, c, w);
    h = s.h;
    c = s.c;
    outputs[t] = h;
  }
  return outputs;
}

}  // namespace

LstmState lstm_step(Tape& tape, Var x_t, Var h_prev, Var c_prev, LstmWeights& w) {
  const std::size_t cell = w.cell_dim();
  if (x_t.value().rank() != 2 || x_t.value().rows() != 1 || x_t.value().cols() != w.input_dim() ||
      h_prev.shape() != Shape{1, cell} || c_prev.shape() != Shape{1, cell}) {
    throw ShapeError("lstm_step: x " + shape_str(x_t.shape()) + ", h " + shape_str(h_prev.shape()) + ", c " +
                     shape_str(c_prev.shape()) + " do not fit cell " + shape_str(w.w_input.value.shape));
  }
  const GateInputs x{matmul(x_t, tape.param(w.w_input)), matmul(x_t, tape.param(w.w_forget)),
                     matmul(x_t, tape.param(w.w_output)), matmul(x_t, tape.param(w.w_cell))};
  return step_from_inputs(tape, x, h_prev, c_prev, w);
}

BiLstmOutput bilstm(Tape& tape, Var sequence, std::span<const int> pad_mask, BiLstmLayer& layer) {
  const Tensor& xv = sequence.value();
  if (xv.rank() != 2 || xv.rows() == 0) throw std::invalid_argument("bilstm: empty sequence");
  const std::size_t seq = xv.rows();
  if (pad_mask.size() != seq) {
    throw ShapeError("bilstm: mask length " + std::to_string(pad_mask.size()) + " vs sequence " + std::to_string(seq));
  }
  if (xv.cols() != layer.forward.input_dim() || xv.cols() != layer.backward.input_dim()) {
    throw ShapeError("bilstm: input " + shape_str(xv.shape) + " vs cell input " + shape_str(layer.forward.w_input.value.shape));
  }
  std::size_t n = 0;
  while (n < seq && pad_mask[n]) ++n;
  for (std::size_t t = n; t < seq; ++t) {
    if (pad_mask[t]) throw std::invalid_argument("bilstm: padding must be a suffix of the mask");
  }
  if (n == 0) throw std::invalid_argument("bilstm: no unpadded positions");

  auto assemble = [&](std::vector<Var> rows, std::size_t cell) {
    if (n < seq) rows.push_back(tape.constant(Tensor(Shape{seq - n, cell}, 0.0)));
    return rows.size() == 1 ? rows[0] : concat_rows(rows);
  };
  BiLstmOutput out;
  out.forward = assemble(run_direction(tape, sequence, n, false, layer.forward), layer.forward.cell_dim());
  out.backward = assemble(run_direction(tape, sequence, n, true, layer.backward), layer.backward.cell_dim());
  return out;
}

Var project(Tape& tape, Var forward, Var backward, BiLstmLayer& layer) {
  if (forward.value().rank() != 2 || backward.value().rank() != 2 || forward.value().rows() != backward.value().rows() ||
      forward.value().cols() + backward.value().cols() != layer.w_y.value.rows()) {
    throw ShapeError("project: " + shape_str(forward.shape()) + " and " + shape_str(backward.shape()) +
                     " do not fit W_y " + shape_str(layer.w_y.value.shape));
  }
  const Var parts[] = {forward, backward};
  Var y = add(matmul(concat_cols(parts), tape.param(layer.w_y)), tape.param(layer.b_y));
  return layer.activation == OutputActivation::kTanh ? tanh(y) : y;
}

}  // namespace qa
