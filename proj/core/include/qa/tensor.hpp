#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qa {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents do not conform. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() : shape{}, values(1, 0.0) {}
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> v);

  static Tensor scalar(double x) { return Tensor(Shape{}, std::vector<double>{x}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape, 0.0); }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  double item() const;

  bool all_finite() const;
};

/// Debug dump: a shape line ("rank d0 d1 ...") then one value per line,
/// printed with enough digits to round-trip exactly.
void write_text(std::ostream& os, const Tensor& t);
Tensor read_text(std::istream& is);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

/// A trainable tensor. `grad` accumulates across backward passes until
/// zero_grad() is called.
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}
  void zero_grad();
};

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  /// Gradient of the last backward() loss with respect to this node.
  const Tensor& grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  kConstant,
  kParameter,
  kMatmul,
  kTranspose,
  kAdd,
  kMul,
  kScale,
  kTanh,
  kSigmoid,
  kGelu,
  kSoftmax,
  kLayerNorm,
  kCrossEntropy,
  kSum,
  kGather,
  kSliceRows,
  kSliceCols,
  kConcatRows,
  kConcatCols,
  kReshape,
};

/// Append-only record of a forward computation. Node inputs always precede
/// the node, so reverse append order is a valid topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to `p`; backward() adds this leaf's gradient into p.grad.
  /// Binding the same parameter twice returns the same leaf.
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  /// Parameter gradients are accumulated, never overwritten.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  OpKind op(std::size_t id) const { return nodes_[id].op; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id);

  // Op authoring.
  Var push(OpKind op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  Tensor& grad_mut(std::size_t id);

 private:
  struct Node {
    OpKind op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  // deque: references from Var::value() survive later pushes.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

// ---- differentiable operations ------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);

/// Binary ops accept equal shapes, or one operand whose shape equals the
/// trailing extents of the other (broadcast along leading axes).
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);

Var tanh(Var x);
Var sigmoid(Var x);
/// Exact erf form: 0.5 x (1 + erf(x / sqrt 2)).
Var gelu(Var x);

enum class Elementwise { kAdd, kMul, kTanh, kSigmoid, kGelu };
Var elementwise(Elementwise kind, Var x, Var y = {});

Var softmax(Var x, std::size_t axis);
/// Normalizes over the last axis, then applies gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-12);
/// -log softmax(logits)[target] for a rank-1 logits vector.
Var cross_entropy(Var logits, std::size_t target);

Var sum(Var x);
Var mean(Var x);

/// Selects rows of a rank-2 table.
Var gather_rows(Var table, std::span<const int> ids);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var reshape(Var x, Shape shape);

}  // namespace qa
