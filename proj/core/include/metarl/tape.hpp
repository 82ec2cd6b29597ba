#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "metarl/tensor.hpp"

namespace metarl {

class Tape;

/// Handle to a tensor recorded on a tape.
struct Value {
  std::uint32_t index = UINT32_MAX;
  Tape* tape = nullptr;
  bool valid() const { return tape != nullptr; }
};

/// Reverse-mode automatic differentiation over dense tensors.
///
/// Every primitive op records its output plus a local gradient rule; a single
/// backward sweep in reverse order accumulates the adjoint of each recorded
/// input exactly once. Constants (requires_grad == false) receive no gradient.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor v, bool requires_grad = true);
  Value constant(Tensor v) { return leaf(std::move(v), false); }

  const Tensor& value(Value v) const { return nodes_[v.index].value; }

  /// Gradient accumulated for v by the last backward(); zeros if untouched.
  Tensor grad(Value v) const;

  /// Seeds the (scalar) root with adjoint 1 and replays gradient rules in
  /// reverse op order. Throws NumericError if the root value is not finite.
  void backward(Value root);

  void clear();
  std::size_t num_ops() const { return nodes_.size(); }

  /// When enabled, every recorded value is checked for NaN/Inf and a
  /// NumericError naming the op index is raised on the first violation.
  void set_check_finite(bool on) { check_finite_ = on; }

  // --- recording machinery (used by the op free functions) ---
  using BackwardFn = std::function<void(Tape&, std::uint32_t node_index)>;
  Value record(Tensor out, std::initializer_list<Value> inputs, BackwardFn fn);
  Value record(Tensor out, const std::vector<Value>& inputs, BackwardFn fn);

  bool requires_grad(Value v) const { return nodes_[v.index].requires_grad; }

  /// Adds g into the gradient accumulator of node i (allocating on first use).
  void accumulate(std::uint32_t i, const Tensor& g);
  const Tensor& node_grad(std::uint32_t i) const { return nodes_[i].grad; }
  const Tensor& node_value(std::uint32_t i) const { return nodes_[i].value; }
  const std::vector<std::uint32_t>& node_inputs(std::uint32_t i) const {
    return nodes_[i].inputs;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

// ---- primitive ops ----------------------------------------------------
// All operands are rank-2; shape violations throw ShapeError naming extents.

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);  // elementwise
Value divide(Value a, Value b);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);
Value neg(Value a);

Value matmul(Value a, Value b);
Value transpose(Value a);
/// a: [n,m], bias: [1,m]; adds the row vector to every row.
Value add_rowvec(Value a, Value bias);

Value tanh_v(Value a);
Value relu_v(Value a);
Value exp_v(Value a);
Value log_v(Value a);
Value softplus_v(Value a);
/// Subgradient 1 inside (lo, hi), 0 outside.
Value clamp_v(Value a, double lo, double hi);
/// Elementwise min; gradient routes to the smaller operand (ties to a).
Value minimum(Value a, Value b);

Value sum_all(Value a);   // -> [1,1]
Value mean_all(Value a);  // -> [1,1]
Value col_sums(Value a);  // [n,m] -> [1,m]
Value softmax_rows(Value a);
Value concat_cols(const std::vector<Value>& parts);
Value slice_cols(Value a, std::size_t c0, std::size_t c1);  // half-open
Value replicate_rows(Value a, std::size_t n);               // [1,m] -> [n,m]

/// mean + exp(log_std) * noise; differentiable in mean and log_std.
/// Callers clamp log_std to the global Gaussian-head range beforehand.
Value gaussian_sample_reparam(Value mean, Value log_std, Value noise);
Tensor gaussian_sample_reparam(const Tensor& mean, const Tensor& log_std, const Tensor& noise);

/// Clamp range applied to every Gaussian log-std head in the project.
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

}  // namespace metarl
