#include "qa/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace qa {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  Shape s{v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_str(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_str(shape));
  return shape[1];
}

double Tensor::item() const {
  if (values.size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape));
  return values[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_text(std::ostream& os, const Tensor& t) {
  os << t.rank();
  for (auto d : t.shape) os << ' ' << d;
  os << '\n';
  for (double v : t.values) os << format_double(v) << '\n';
}

Tensor read_text(std::istream& is) {
  std::size_t rank = 0;
  if (!(is >> rank)) throw std::runtime_error("tensor dump: missing shape line");
  Shape shape(rank);
  for (auto& d : shape) {
    if (!(is >> d)) throw std::runtime_error("tensor dump: truncated shape line");
  }
  std::vector<double> values(numel(shape));
  for (auto& v : values) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("tensor dump: truncated values");
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw std::runtime_error("tensor dump: bad value '" + tok + "'");
    }
  }
  return Tensor(std::move(shape), std::move(values));
}

void Parameter::zero_grad() {
  grad.shape = value.shape;
  grad.values.assign(value.values.size(), 0.0);
}

// ---- Var / Tape ---------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(OpKind op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(OpKind::kConstant, {}, std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = push(OpKind::kParameter, {}, p.value, nullptr);
  nodes_.back().param = &p;
  bound_.emplace(&p, v.id());
  return v;
}

Tensor& Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(std::size_t id) { return grad_mut(id); }

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(value(loss.id()).shape));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_mut(loss.id()).values[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      if (pg.values.size() != n.grad.values.size()) n.param->zero_grad();
      for (std::size_t i = 0; i < pg.values.size(); ++i) pg.values[i] += n.grad.values[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

// ---- kernels ------------------------------------------------------------

namespace {

// C[m x n] += op(A) * op(B), where op(A) is m x k and op(B) is k x n.
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, bool ta, const double* b,
          bool tb, double* c) {
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else if (!ta && tb) {
    // B stored n x k.
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        c[i * n + j] += s;
      }
    }
  } else if (ta && !tb) {
    // A stored k x m.
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double api = arow[i];
        if (api == 0.0) continue;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[j * k + p];
        c[i * n + j] += s;
      }
    }
  }
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands must live on the same tape");
  }
  return *a.tape();
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Resolves leading-axis broadcasting; returns the output shape.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  if (is_suffix(b, a)) return a;
  if (is_suffix(a, b)) return b;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
}

// Sums a full-size gradient down to an operand broadcast along leading axes.
void reduce_into(const Tensor& full, Tensor& target) {
  const std::size_t n = target.size();
  for (std::size_t i = 0; i < full.size(); ++i) target.values[i % n] += full.values[i];
}

Var unary(Var x, OpKind op, double (*f)(double), double (*df)(double x, double y)) {
  Tape& t = *x.tape();
  Tensor out = x.value();
  for (auto& v : out.values) v = f(v);
  const std::size_t xi = x.id();
  return t.push(op, {xi}, std::move(out), [xi, df](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(xi);
    const Tensor& yv = tp.value(self);
    Tensor& gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx.values[i] += g.values[i] * df(xv.values[i], yv.values[i]);
  });
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0]) {
    throw ShapeError("matmul: dimension mismatch " + shape_str(av.shape) + " x " + shape_str(bv.shape));
  }
  const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor out(Shape{m, n}, 0.0);
  gemm(m, n, k, av.values.data(), false, bv.values.data(), false, out.values.data());
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(OpKind::kMatmul, {ai, bi}, std::move(out), [ai, bi, m, n, k](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    // dA = G B^T ; dB = A^T G
    gemm(m, k, n, g.values.data(), false, tp.value(bi).values.data(), true, tp.grad_mut(ai).values.data());
    gemm(k, n, m, tp.value(ai).values.data(), true, g.values.data(), false, tp.grad_mut(bi).values.data());
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.values[j * r + i] = av.values[i * c + j];
  const std::size_t ai = a.id();
  return t.push(OpKind::kTranspose, {ai}, std::move(out), [ai, r, c](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_mut(ai);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga.values[i * c + j] += g.values[j * r + i];
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  Shape s = broadcast_shape(a.shape(), b.shape(), "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(s);
  const std::size_t na = av.size(), nb = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = av.values[i % na] + bv.values[i % nb];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(OpKind::kAdd, {ai, bi}, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    reduce_into(g, tp.grad_mut(ai));
    reduce_into(g, tp.grad_mut(bi));
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  Shape s = broadcast_shape(a.shape(), b.shape(), "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(s);
  const std::size_t na = av.size(), nb = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = av.values[i % na] * bv.values[i % nb];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(OpKind::kMul, {ai, bi}, std::move(out), [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& av = tp.value(ai);
    const Tensor& bv = tp.value(bi);
    Tensor& ga = tp.grad_mut(ai);
    Tensor& gb = tp.grad_mut(bi);
    const std::size_t na = av.size(), nb = bv.size();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values[i % na] += g.values[i] * bv.values[i % nb];
      gb.values[i % nb] += g.values[i] * av.values[i % na];
    }
  });
}

Var scale(Var a, double k) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.values) v *= k;
  const std::size_t ai = a.id();
  return t.push(OpKind::kScale, {ai}, std::move(out), [ai, k](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_mut(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += k * g.values[i];
  });
}

Var tanh(Var x) {
  return unary(
      x, OpKind::kTanh, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x, OpKind::kSigmoid,
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var gelu(Var x) {
  return unary(
      x, OpKind::kGelu, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

Var elementwise(Elementwise kind, Var x, Var y) {
  switch (kind) {
    case Elementwise::kAdd:
      return add(x, y);
    case Elementwise::kMul:
      return mul(x, y);
    case Elementwise::kTanh:
      return tanh(x);
    case Elementwise::kSigmoid:
      return sigmoid(x);
    case Elementwise::kGelu:
      return gelu(x);
  }
  throw std::invalid_argument("elementwise: unknown kind");
}

Var softmax(Var x, std::size_t axis) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(xv.shape));
  }
  const std::size_t len = xv.shape[axis];
  if (len == 0) throw ShapeError("softmax: empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= xv.shape[d];
  for (std::size_t d = axis + 1; d < xv.rank(); ++d) inner *= xv.shape[d];
  Tensor out(xv.shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xv.values[base];
      for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, xv.values[base + i * inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = std::exp(xv.values[base + i * inner] - mx);
        out.values[base + i * inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < len; ++i) out.values[base + i * inner] /= z;
    }
  }
  const std::size_t xi = x.id();
  return t.push(OpKind::kSoftmax, {xi}, std::move(out), [xi, outer, inner, len](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& y = tp.value(self);
    Tensor& gx = tp.grad_mut(xi);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += g.values[base + i * inner] * y.values[base + i * inner];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t k = base + i * inner;
          gx.values[k] += y.values[k] * (g.values[k] - dot);
        }
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = xv.shape.back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                     " do not match input " + shape_str(xv.shape));
  }
  const std::size_t rows = xv.size() / d;
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape);
  Tensor xhat(xv.shape);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.values.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (row[i] - mu) * inv_std[r];
      xhat.values[r * d + i] = h;
      out.values[r * d + i] = h * gv.values[i] + bv.values[i];
    }
  }
  const std::size_t xi = x.id(), gi = gain.id(), bi = bias.id();
  return t.push(OpKind::kLayerNorm, {xi, gi, bi}, std::move(out),
                [xi, gi, bi, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                                            std::size_t self) {
                  const Tensor& g = tp.out_grad(self);
                  const Tensor& gv = tp.value(gi);
                  Tensor& gx = tp.grad_mut(xi);
                  Tensor& gg = tp.grad_mut(gi);
                  Tensor& gb = tp.grad_mut(bi);
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double sum_dh = 0.0, sum_dh_h = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                      const std::size_t k = r * d + i;
                      const double dh = g.values[k] * gv.values[i];
                      sum_dh += dh;
                      sum_dh_h += dh * xhat.values[k];
                      gg.values[i] += g.values[k] * xhat.values[k];
                      gb.values[i] += g.values[k];
                    }
                    for (std::size_t i = 0; i < d; ++i) {
                      const std::size_t k = r * d + i;
                      const double dh = g.values[k] * gv.values[i];
                      gx.values[k] += inv_std[r] * (dh - inv_d * sum_dh - xhat.values[k] * inv_d * sum_dh_h);
                    }
                  }
                });
}

Var cross_entropy(Var logits, std::size_t target) {
  Tape& t = *logits.tape();
  const Tensor& lv = logits.value();
  if (lv.rank() != 1) throw ShapeError("cross_entropy: logits must be rank 1, got " + shape_str(lv.shape));
  const std::size_t n = lv.size();
  if (target >= n) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " out of range for " +
                            std::to_string(n) + " classes");
  }
  const double mx = *std::max_element(lv.values.begin(), lv.values.end());
  std::vector<double> probs(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = std::exp(lv.values[i] - mx);
    z += probs[i];
  }
  for (auto& p : probs) p /= z;
  const double loss = -(lv.values[target] - mx - std::log(z));
  const std::size_t li = logits.id();
  return t.push(OpKind::kCrossEntropy, {li}, Tensor::scalar(loss),
                [li, target, probs = std::move(probs)](Tape& tp, std::size_t self) {
                  const double g = tp.out_grad(self).values[0];
                  Tensor& gl = tp.grad_mut(li);
                  for (std::size_t i = 0; i < probs.size(); ++i) {
                    gl.values[i] += g * (probs[i] - (i == target ? 1.0 : 0.0));
                  }
                });
}

Var sum(Var x) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.values) s += v;
  const std::size_t xi = x.id();
  return t.push(OpKind::kSum, {xi}, Tensor::scalar(s), [xi](Tape& tp, std::size_t self) {
    const double g = tp.out_grad(self).values[0];
    for (auto& v : tp.grad_mut(xi).values) v += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var gather_rows(Var table, std::span<const int> ids) {
  Tape& t = *table.tape();
  const Tensor& tv = table.value();
  const std::size_t rows = tv.rows(), cols = tv.cols();
  Tensor out(Shape{ids.size(), cols});
  std::vector<std::size_t> idx(ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= rows) {
      throw std::out_of_range("gather_rows: index " + std::to_string(ids[r]) + " outside table of " +
                              std::to_string(rows) + " rows");
    }
    idx[r] = static_cast<std::size_t>(ids[r]);
    std::copy_n(tv.values.begin() + static_cast<std::ptrdiff_t>(idx[r] * cols), cols,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const std::size_t ti = table.id();
  return t.push(OpKind::kGather, {ti}, std::move(out), [ti, cols, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& gt = tp.grad_mut(ti);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) gt.values[idx[r] * cols + c] += g.values[r * cols + c];
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (begin + count > rows) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                     shape_str(xv.shape));
  }
  Tensor out(Shape{count, cols});
  std::copy_n(xv.values.begin() + static_cast<std::ptrdiff_t>(begin * cols), count * cols, out.values.begin());
  const std::size_t xi = x.id();
  return t.push(OpKind::kSliceRows, {xi}, std::move(out), [xi, begin, cols](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx.values[begin * cols + i] += g.values[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (begin + count > cols) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                     shape_str(xv.shape));
  }
  Tensor out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out.values[r * count + c] = xv.values[r * cols + begin + c];
  const std::size_t xi = x.id();
  return t.push(OpKind::kSliceCols, {xi}, std::move(out), [xi, begin, rows, cols, count](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) gx.values[r * cols + begin + c] += g.values[r * count + c];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = *parts[0].tape();
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("concat_rows: operands must live on the same tape");
    if (p.value().cols() != cols) {
      throw ShapeError("concat_rows: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    rows += p.value().rows();
    ids.push_back(p.id());
  }
  Tensor out(Shape{rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values.begin(), p.value().values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  auto inputs = ids;
  return t.push(OpKind::kConcatRows, std::move(inputs), std::move(out), [ids](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      Tensor& gi = tp.grad_mut(id);
      for (auto& v : gi.values) v += g.values[off++];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = *parts[0].tape();
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("concat_cols: operands must live on the same tape");
    if (p.value().rows() != rows) {
      throw ShapeError("concat_cols: " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
    cols += widths.back();
  }
  Tensor out(Shape{rows, cols});
  std::size_t c0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out.values[r * cols + c0 + c] = pv.values[r * widths[k] + c];
    c0 += widths[k];
  }
  auto inputs = ids;
  return t.push(OpKind::kConcatCols, std::move(inputs), std::move(out),
                [ids, widths, rows, cols](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.out_grad(self);
                  std::size_t c0 = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    Tensor& gi = tp.grad_mut(ids[k]);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < widths[k]; ++c)
                        gi.values[r * widths[k] + c] += g.values[r * cols + c0 + c];
                    c0 += widths[k];
                  }
                });
}

Var reshape(Var x, Shape shape) {
  Tape& t = *x.tape();
  if (numel(shape) != x.value().size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor out(std::move(shape), x.value().values);
  const std::size_t xi = x.id();
  return t.push(OpKind::kReshape, {xi}, std::move(out), [xi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx.values[i] += g.values[i];
  });
}

}  // namespace qa
