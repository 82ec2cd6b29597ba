#include "metarl/mlp.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace metarl {

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Activation output,
                   Rng& rng, double final_scale) {
  if (sizes.size() < 2) throw ConfigError("mlp needs at least input and output extents");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    std::size_t in = sizes[i], out = sizes[i + 1];
    bool last = (i + 2 == sizes.size());
    MlpParams::Layer layer;
    layer.weight = Tensor({in, out});
    double limit = (last && final_scale > 0.0)
                       ? final_scale
                       : std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t k = 0; k < layer.weight.size(); ++k)
      layer.weight[k] = rng.uniform(-limit, limit);
    layer.bias = Tensor({1, out});
    layer.act = last ? output : hidden;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

void apply_activation(Tensor& t, Activation a) {
  switch (a) {
    case Activation::identity: return;
    case Activation::tanh:
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::tanh(t[i]);
      return;
    case Activation::relu:
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] > 0.0 ? t[i] : 0.0;
      return;
  }
}

}  // namespace

Tensor mlp_forward(const MlpParams& params, const Tensor& input) {
  if (input.cols() != params.input_dim()) {
    throw ShapeError("mlp_forward: input extent " + std::to_string(input.cols()) +
                     " does not match first layer input dimension " +
                     std::to_string(params.input_dim()));
  }
  Tensor h = input;
  for (const auto& l : params.layers) {
    Tensor z = matmul(h, l.weight);
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c) z.at(r, c) += l.bias[c];
    apply_activation(z, l.act);
    h = std::move(z);
  }
  return h;
}

MlpVars lift_mlp(Tape& tape, const MlpParams& params, bool requires_grad) {
  MlpVars v;
  for (const auto& l : params.layers) {
    v.layers.push_back({tape.leaf(l.weight, requires_grad), tape.leaf(l.bias, requires_grad),
                        l.act});
  }
  return v;
}

Value mlp_apply(const MlpVars& vars, Value input) {
  Value h = input;
  for (const auto& l : vars.layers) {
    h = add_rowvec(matmul(h, l.weight), l.bias);
    switch (l.act) {
      case Activation::identity: break;
      case Activation::tanh: h = tanh_v(h); break;
      case Activation::relu: h = relu_v(h); break;
    }
  }
  return h;
}

std::vector<Tensor> mlp_grads(const Tape& tape, const MlpVars& vars) {
  std::vector<Tensor> out;
  for (const auto& l : vars.layers) {
    out.push_back(tape.grad(l.weight));
    out.push_back(tape.grad(l.bias));
  }
  return out;
}

std::vector<Tensor> grad(const LossBuilder& loss_builder, const MlpParams& params) {
  Tape tape;
  MlpVars vars = lift_mlp(tape, params);
  Value loss = loss_builder(tape, vars);
  tape.backward(loss);
  return mlp_grads(tape, vars);
}

std::vector<Tensor*> param_refs(MlpParams& params) {
  std::vector<Tensor*> out;
  for (auto& l : params.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> param_refs(const MlpParams& params) {
  std::vector<const Tensor*> out;
  for (const auto& l : params.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

}  // namespace metarl
