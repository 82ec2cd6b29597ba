#include "metarl/adam.hpp"

#include <cmath>
#include <string>

namespace metarl {

void AdamState::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(Tensor::zeros(p->shape()));
      v_.emplace_back(Tensor::zeros(p->shape()));
    }
  }
  if (m_.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(m_.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    check_same_shape(p, g, "adam grad");
    check_same_shape(p, m_[i], "adam moment");
    if (cfg_.plain_sgd) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg_.lr * g[k];
      continue;
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g[k];
      v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      double mhat = m_[i][k] / bc1;
      double vhat = v_[i][k] / bc2;
      p[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace metarl
