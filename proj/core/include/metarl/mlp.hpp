#pragma once

#include <functional>
#include <span>
#include <vector>

#include "metarl/rng.hpp"
#include "metarl/tape.hpp"
#include "metarl/tensor.hpp"

namespace metarl {

enum class Activation { identity, tanh, relu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// Feed-forward network parameters: weight [in,out] and bias [1,out] per
/// layer plus the activation applied after that layer's affine map.
struct MlpParams {
  struct Layer {
    Tensor weight;
    Tensor bias;
    Activation act = Activation::identity;
  };
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  std::size_t parameter_count() const;
};

/// Xavier-uniform hidden layers; the final layer is drawn uniform in
/// +-final_scale when final_scale > 0 (small heads keep early SAC updates tame).
MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden, Activation output,
                   Rng& rng, double final_scale = 0.0);

/// Plain forward pass, input [n,in] -> [n,out]. No tape involvement.
Tensor mlp_forward(const MlpParams& params, const Tensor& input);

/// Parameters lifted onto a tape for differentiation.
struct MlpVars {
  struct Layer {
    Value weight;
    Value bias;
    Activation act;
  };
  std::vector<Layer> layers;
};

MlpVars lift_mlp(Tape& tape, const MlpParams& params, bool requires_grad = true);

/// Forward pass through lifted parameters; recorded on the tape.
Value mlp_apply(const MlpVars& vars, Value input);

/// Gradient tensors for vars in parameter order (w0, b0, w1, b1, ...).
std::vector<Tensor> mlp_grads(const Tape& tape, const MlpVars& vars);

/// Computes d(loss)/d(params) for a scalar-valued builder. One gradient per
/// parameter tensor, in (w0, b0, w1, b1, ...) order; parameters the loss
/// never touches get zero gradients.
using LossBuilder = std::function<Value(Tape&, const MlpVars&)>;
std::vector<Tensor> grad(const LossBuilder& loss_builder, const MlpParams& params);

/// Stable pointers to every parameter tensor, in the same order as grad().
std::vector<Tensor*> param_refs(MlpParams& params);
std::vector<const Tensor*> param_refs(const MlpParams& params);

}  // namespace metarl
