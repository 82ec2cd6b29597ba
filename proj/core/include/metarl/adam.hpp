#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metarl/tensor.hpp"

namespace metarl {

struct OptimConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool plain_sgd = false;  // theta -= lr * g, no moments
};

/// Adaptive-moment SGD state. Accumulators mirror the parameter shapes and
/// are allocated on the first step; the step counter increases by one per
/// update.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(OptimConfig cfg) : cfg_(cfg) {}

  /// Applies one update in place. grads[i] must match params[i]'s shape.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  std::uint64_t steps() const { return t_; }
  const OptimConfig& config() const { return cfg_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  OptimConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace metarl
