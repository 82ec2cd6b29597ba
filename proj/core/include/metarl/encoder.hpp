#pragma once

#include <span>
#include <string>
#include <vector>

#include "metarl/mlp.hpp"
#include "metarl/tape.hpp"
#include "metarl/tasks.hpp"

namespace metarl::encoder {

/// Diagonal Gaussian posterior over the latent task variable.
struct GaussianBelief {
  Tensor mean;     // [1, latent_dim]
  Tensor log_std;  // [1, latent_dim]

  static GaussianBelief prior(std::size_t latent_dim) {
    return {Tensor({1, latent_dim}), Tensor({1, latent_dim})};
  }

  std::size_t dim() const { return mean.cols(); }

  Tensor sample(Rng& rng) const {
    return gaussian_sample_reparam(mean, log_std, rng.normal_tensor(mean.shape()));
  }
};

/// KL(N(mean, std) || N(0, I)) summed over dimensions.
double kl_to_prior(const GaussianBelief& belief);

enum class Kind { gnn, gp, ws };

Kind kind_from_string(const std::string& s);
std::string to_string(Kind k);

struct EncoderConfig {
  Kind kind = Kind::gnn;
  std::size_t feature_dim = 0;     // node feature (s, a, r, s') width
  std::size_t channels = 64;       // per-node embedding width
  std::size_t latent_nodes = 8;    // fixed latent-node count of the first stage
  std::size_t attention_iters = 1;
  std::size_t latent_dim = 5;      // task-variable dimension
  std::size_t embed_hidden = 64;
};

/// Parameters for every encoder variant. All variants share the per-node
/// embedder; the graph path owns affinities, attention projections and the
/// Gaussian head, the Gaussian-product path owns its per-node factor head.
struct EncoderParams {
  EncoderConfig cfg;
  MlpParams embedder;        // feature_dim -> channels
  Tensor stage1_affinity;    // [latent_nodes, channels]
  Tensor attn_query;         // [channels, channels]
  Tensor attn_key;
  Tensor attn_value;
  Tensor stage2_affinity;    // [1, channels]
  MlpParams mean_head;       // channels -> latent_dim, linear
  MlpParams log_std_head;    // channels -> latent_dim, linear
  MlpParams factor_head;     // channels -> 2*latent_dim (Gaussian-product variant)
};

EncoderParams make_encoder(const EncoderConfig& cfg, Rng& rng);

std::vector<Tensor*> param_refs(EncoderParams& p);
std::vector<const Tensor*> param_refs(const EncoderParams& p);

/// Rows are (state, action, reward, next_state) per transition.
Tensor context_matrix(std::span<const tasks::Transition> transitions, tasks::Family family);
std::size_t context_feature_dim(tasks::Family family);

// ---- differentiable building blocks -------------------------------------

/// Softmax-weighted sums of the input nodes, one output node per affinity
/// row: out_k = sum_j softmax_j(affinity_k . node_j) node_j.
Value aggregate(Value nodes, Value affinities);

/// Scaled dot-product self-attention over the latent nodes with learned
/// projections and a residual connection, repeated iters times.
Value self_attend(Value latent, Value query_w, Value key_w, Value value_w,
                  std::size_t iters);

struct EncoderVars {
  MlpVars embedder;
  Value stage1_affinity, attn_query, attn_key, attn_value, stage2_affinity;
  MlpVars mean_head, log_std_head, factor_head;
};

EncoderVars lift_encoder(Tape& tape, const EncoderParams& p, bool requires_grad = true);

struct BeliefVars {
  Value mean;
  Value log_std;
};

/// Posterior from a context of n >= 1 transitions; recorded on the tape.
BeliefVars encode_on(Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                     const Tensor& raw_context, Kind kind);

Value kl_to_prior(BeliefVars belief);

// ---- plain evaluation ----------------------------------------------------

/// Posterior using the configured variant.
GaussianBelief encode(const EncoderParams& p, const Tensor& raw_context);

GaussianBelief gnn_encode(const EncoderParams& p, const Tensor& raw_context);
GaussianBelief gp_encode(const EncoderParams& p, const Tensor& raw_context);
GaussianBelief ws_encode(const EncoderParams& p, const Tensor& raw_context);

/// Sigma floor for Gaussian-product factors.
inline constexpr double kFactorSigmaFloor = 1e-6;

}  // namespace metarl::encoder
