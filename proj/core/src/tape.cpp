#include "metarl/tape.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace metarl {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

Eigen::Map<const EMat> emap(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

Eigen::Map<EMat> emap(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

Tape& same_tape(Value a, Value b) {
  if (a.tape != b.tape) throw ProtocolError("operands recorded on different tapes");
  return *a.tape;
}

}  // namespace

Value Tape::leaf(Tensor v, bool requires_grad) {
  Node n;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1), this};
}

Value Tape::record(Tensor out, std::initializer_list<Value> inputs, BackwardFn fn) {
  return record(std::move(out), std::vector<Value>(inputs), std::move(fn));
}

Value Tape::record(Tensor out, const std::vector<Value>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(out);
  for (Value v : inputs) {
    if (v.tape != this) throw ProtocolError("input recorded on a different tape");
    n.inputs.push_back(v.index);
    n.requires_grad = n.requires_grad || nodes_[v.index].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  std::uint32_t idx = static_cast<std::uint32_t>(nodes_.size() - 1);
  if (check_finite_ && !nodes_[idx].value.all_finite()) {
    throw NumericError("non-finite value produced at op index " + std::to_string(idx));
  }
  return Value{idx, this};
}

Tensor Tape::grad(Value v) const {
  const Node& n = nodes_[v.index];
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::accumulate(std::uint32_t i, const Tensor& g) {
  Node& n = nodes_[i];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t k = 0; k < n.grad.size(); ++k) n.grad[k] += g[k];
}

void Tape::backward(Value root) {
  const Tensor& rv = nodes_[root.index].value;
  if (rv.size() != 1) throw ShapeError("backward root must be scalar, got " + rv.shape_str());
  if (!rv.all_finite()) {
    throw NumericError("non-finite loss at op index " + std::to_string(root.index));
  }
  accumulate(root.index, Tensor::scalar(1.0));
  for (std::uint32_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---- op helpers --------------------------------------------------------

namespace {

/// Records an elementwise-unary op; dfn maps (x, y) -> dy/dx.
template <typename Fn, typename Dfn>
Value unary(Value a, Fn fn, Dfn) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& y = tp.node_value(self);
    const Tensor& x = tp.node_value(ai);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * Dfn()(x[i], y[i]);
    tp.accumulate(ai, gx);
  });
}

}  // namespace

Value add(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  check_same_shape(x, y, "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return t.record(std::move(out), {a, b},
                  [ai = a.index, bi = b.index](Tape& tp, std::uint32_t self) {
                    tp.accumulate(ai, tp.node_grad(self));
                    tp.accumulate(bi, tp.node_grad(self));
                  });
}

Value sub(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  check_same_shape(x, y, "sub");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return t.record(std::move(out), {a, b},
                  [ai = a.index, bi = b.index](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    tp.accumulate(ai, g);
                    Tensor gn(g.shape());
                    for (std::size_t i = 0; i < g.size(); ++i) gn[i] = -g[i];
                    tp.accumulate(bi, gn);
                  });
}

Value mul(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  check_same_shape(x, y, "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return t.record(std::move(out), {a, b},
                  [ai = a.index, bi = b.index](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    const Tensor& x = tp.node_value(ai);
                    const Tensor& y = tp.node_value(bi);
                    Tensor ga(x.shape()), gb(y.shape());
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      ga[i] = g[i] * y[i];
                      gb[i] = g[i] * x[i];
                    }
                    tp.accumulate(ai, ga);
                    tp.accumulate(bi, gb);
                  });
}

Value divide(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  check_same_shape(x, y, "divide");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  return t.record(std::move(out), {a, b},
                  [ai = a.index, bi = b.index](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    const Tensor& x = tp.node_value(ai);
                    const Tensor& y = tp.node_value(bi);
                    Tensor ga(x.shape()), gb(y.shape());
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      ga[i] = g[i] / y[i];
                      gb[i] = -g[i] * x[i] / (y[i] * y[i]);
                    }
                    tp.accumulate(ai, ga);
                    tp.accumulate(bi, gb);
                  });
}

Value scale(Value a, double c) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
  return t.record(std::move(out), {a}, [ai = a.index, c](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    Tensor gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = c * g[i];
    tp.accumulate(ai, gx);
  });
}

Value add_scalar(Value a, double c) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + c;
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::uint32_t self) {
    tp.accumulate(ai, tp.node_grad(self));
  });
}

Value neg(Value a) { return scale(a, -1.0); }

Value matmul(Value a, Value b) {
  Tape& t = same_tape(a, b);
  Tensor out = matmul(t.value(a), t.value(b));
  return t.record(std::move(out), {a, b},
                  [ai = a.index, bi = b.index](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    const Tensor& x = tp.node_value(ai);
                    const Tensor& y = tp.node_value(bi);
                    Tensor ga({x.rows(), x.cols()});
                    Tensor gb({y.rows(), y.cols()});
                    emap(ga).noalias() = emap(g) * emap(y).transpose();
                    emap(gb).noalias() = emap(x).transpose() * emap(g);
                    tp.accumulate(ai, ga);
                    tp.accumulate(bi, gb);
                  });
}

Value transpose(Value a) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out({x.cols(), x.rows()});
  emap(out) = emap(x).transpose();
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    Tensor gx({g.cols(), g.rows()});
    emap(gx) = emap(g).transpose();
    tp.accumulate(ai, gx);
  });
}

Value add_rowvec(Value a, Value bias) {
  Tape& t = same_tape(a, bias);
  const Tensor& x = t.value(a);
  const Tensor& b = t.value(bias);
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw ShapeError("add_rowvec bias [1x" + std::to_string(x.cols()) + "] expected, got " +
                     b.shape_str());
  }
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(r, c) + b[c];
  return t.record(std::move(out), {a, bias},
                  [ai = a.index, bi = bias.index](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    tp.accumulate(ai, g);
                    Tensor gb({1, g.cols()});
                    for (std::size_t r = 0; r < g.rows(); ++r)
                      for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
                    tp.accumulate(bi, gb);
                  });
}

namespace dfns {
struct Tanh {
  double operator()(double, double y) const { return 1.0 - y * y; }
};
struct Relu {
  double operator()(double x, double) const { return x > 0.0 ? 1.0 : 0.0; }
};
struct Exp {
  double operator()(double, double y) const { return y; }
};
struct Log {
  double operator()(double x, double) const { return 1.0 / x; }
};
struct Softplus {
  double operator()(double x, double) const { return 1.0 / (1.0 + std::exp(-x)); }
};
}  // namespace dfns

Value tanh_v(Value a) {
  return unary(a, [](double x) { return std::tanh(x); }, dfns::Tanh());
}

Value relu_v(Value a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, dfns::Relu());
}

Value exp_v(Value a) {
  return unary(a, [](double x) { return std::exp(x); }, dfns::Exp());
}

Value log_v(Value a) {
  return unary(a, [](double x) { return std::log(x); }, dfns::Log());
}

Value softplus_v(Value a) {
  // max(x,0) + log1p(exp(-|x|)) is overflow-safe.
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      dfns::Softplus());
}

Value clamp_v(Value a, double lo, double hi) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(std::max(x[i], lo), hi);
  return t.record(std::move(out), {a}, [ai = a.index, lo, hi](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& x = tp.node_value(ai);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = (x[i] > lo && x[i] < hi) ? g[i] : 0.0;
    tp.accumulate(ai, gx);
  });
}

Value minimum(Value a, Value b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& y = t.value(b);
  check_same_shape(x, y, "minimum");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(x[i], y[i]);
  return t.record(std::move(out), {a, b},
                  [ai = a.index, bi = b.index](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.node_grad(self);
                    const Tensor& x = tp.node_value(ai);
                    const Tensor& y = tp.node_value(bi);
                    Tensor ga(x.shape()), gb(y.shape());
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      if (x[i] <= y[i]) {
                        ga[i] = g[i];
                      } else {
                        gb[i] = g[i];
                      }
                    }
                    tp.accumulate(ai, ga);
                    tp.accumulate(bi, gb);
                  });
}

Value sum_all(Value a) {
  Tape& t = *a.tape;
  return t.record(Tensor::scalar(t.value(a).sum()), {a},
                  [ai = a.index](Tape& tp, std::uint32_t self) {
                    double g = tp.node_grad(self)[0];
                    tp.accumulate(ai, Tensor::full(tp.node_value(ai).shape(), g));
                  });
}

Value mean_all(Value a) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  double inv = 1.0 / static_cast<double>(x.size());
  return t.record(Tensor::scalar(x.sum() * inv), {a},
                  [ai = a.index, inv](Tape& tp, std::uint32_t self) {
                    double g = tp.node_grad(self)[0] * inv;
                    tp.accumulate(ai, Tensor::full(tp.node_value(ai).shape(), g));
                  });
}

Value col_sums(Value a) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out({1, x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x.at(r, c);
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& x = tp.node_value(ai);
    Tensor gx(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) gx.at(r, c) = g[c];
    tp.accumulate(ai, gx);
  });
}

Value softmax_rows(Value a) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x.at(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) mx = std::max(mx, x.at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) denom += std::exp(x.at(r, c) - mx);
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = std::exp(x.at(r, c) - mx) / denom;
  }
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& y = tp.node_value(self);
    Tensor gx(y.shape());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c)
        gx.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
    }
    tp.accumulate(ai, gx);
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = *parts[0].tape;
  std::size_t rows = t.value(parts[0]).rows();
  std::size_t cols = 0;
  for (Value v : parts) {
    if (t.value(v).rows() != rows) {
      throw ShapeError("concat_cols row mismatch: " + std::to_string(rows) + " vs " +
                       std::to_string(t.value(v).rows()));
    }
    cols += t.value(v).cols();
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (Value v : parts) {
    const Tensor& x = t.value(v);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, off + c) = x.at(r, c);
    off += x.cols();
  }
  std::vector<std::uint32_t> idx;
  std::vector<std::size_t> widths;
  for (Value v : parts) {
    idx.push_back(v.index);
    widths.push_back(t.value(v).cols());
  }
  return t.record(std::move(out), parts, [idx, widths](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < idx.size(); ++p) {
      Tensor gp({g.rows(), widths[p]});
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < widths[p]; ++c) gp.at(r, c) = g.at(r, off + c);
      tp.accumulate(idx[p], gp);
      off += widths[p];
    }
  });
}

Value slice_cols(Value a, std::size_t c0, std::size_t c1) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  if (c1 > x.cols() || c0 >= c1) {
    throw ShapeError("slice_cols [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") out of range for cols " + std::to_string(x.cols()));
  }
  Tensor out({x.rows(), c1 - c0});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = x.at(r, c);
  return t.record(std::move(out), {a}, [ai = a.index, c0](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    const Tensor& x = tp.node_value(ai);
    Tensor gx(x.shape());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx.at(r, c0 + c) = g.at(r, c);
    tp.accumulate(ai, gx);
  });
}

Value replicate_rows(Value a, std::size_t n) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  if (x.rows() != 1) throw ShapeError("replicate_rows expects [1xm], got " + x.shape_str());
  Tensor out({n, x.cols()});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x[c];
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.node_grad(self);
    Tensor gx({1, g.cols()});
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx[c] += g.at(r, c);
    tp.accumulate(ai, gx);
  });
}

Value gaussian_sample_reparam(Value mean, Value log_std, Value noise) {
  return add(mean, mul(exp_v(log_std), noise));
}

Tensor gaussian_sample_reparam(const Tensor& mean, const Tensor& log_std, const Tensor& noise) {
  check_same_shape(mean, log_std, "gaussian_sample_reparam");
  check_same_shape(mean, noise, "gaussian_sample_reparam");
  Tensor out(mean.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = mean[i] + std::exp(log_std[i]) * noise[i];
  return out;
}

}  // namespace metarl
