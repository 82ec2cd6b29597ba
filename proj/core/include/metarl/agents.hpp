#pragma once

#include <utility>

#include "metarl/adam.hpp"
#include "metarl/mlp.hpp"
#include "metarl/rng.hpp"
#include "metarl/tape.hpp"

namespace metarl::agents {

/// Task-conditioned squashed-Gaussian policy. The network maps (state, latent)
/// to pre-squash mean and log-std; actions are tanh-squashed into [-1,1]^dim.
struct PolicyParams {
  MlpParams net;  // (s_dim + z_dim) -> 2*a_dim, columns [mean | log_std]
  std::size_t action_dim = 0;
};

/// Two independently initialized critics sharing an architecture.
struct TwinCriticParams {
  MlpParams q1;  // (s_dim + a_dim + z_dim) -> 1
  MlpParams q2;
};

/// Learnable entropy coefficient, log-parameterized so alpha stays positive.
struct Temperature {
  Tensor log_alpha = Tensor::scalar(0.0);
  double target_entropy = -1.0;
  AdamState opt;

  double alpha() const { return std::exp(log_alpha[0]); }
};

struct AgentConfig {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t latent_dim = 0;
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  OptimConfig optim;
  double target_entropy_scale = 1.0;  // target entropy = -scale * action_dim
};

/// One soft actor-critic head: policy, twin critics with Polyak targets,
/// temperature, and per-group optimizer state.
struct SacAgent {
  PolicyParams policy;
  TwinCriticParams critic;
  TwinCriticParams target;
  Temperature temp;
  AdamState policy_opt;
  AdamState critic_opt;
};

SacAgent make_agent(const AgentConfig& cfg, Rng& rng);

/// Column-matrix form of a transition batch.
struct BatchTensors {
  Tensor states;       // [n, s_dim]
  Tensor actions;      // [n, a_dim]
  Tensor rewards;      // [n, 1]
  Tensor next_states;  // [n, s_dim]
  Tensor terminals;    // [n, 1], 0/1
  std::size_t size() const { return states.rows(); }
};

struct PolicySample {
  Tensor actions;    // [n, a_dim], strictly inside the box
  Tensor log_probs;  // [n, 1], includes the tanh change-of-variables term
};

/// Draws a ~ tanh(mean + std*eps) per row; deterministic mode returns
/// tanh(mean) (log_probs then hold the density at that point).
PolicySample policy_sample(const PolicyParams& policy, const Tensor& states,
                           const Tensor& latents, Rng& rng, bool deterministic = false);

/// Density of given actions under the policy; actions must lie inside the box.
Tensor policy_log_prob(const PolicyParams& policy, const Tensor& states,
                       const Tensor& latents, const Tensor& actions);

/// Twin critic values for a batch; each [n, 1].
std::pair<Tensor, Tensor> q_values(const TwinCriticParams& critic, const Tensor& states,
                                   const Tensor& actions, const Tensor& latents);

/// Scalar convenience for single (s, a, z) rows.
std::pair<double, double> q_value(const TwinCriticParams& critic, const Tensor& state,
                                  const Tensor& action, const Tensor& latent);

/// Soft TD targets y = r + gamma*(1-terminal)*(min twin target - alpha*log pi(a'|s',z)),
/// with a' freshly sampled from the policy at s'.
Tensor td_targets(const TwinCriticParams& target, const PolicyParams& policy, double alpha,
                  const BatchTensors& batch, const Tensor& latents, double gamma, Rng& rng);

/// Greedy bootstrap r + gamma*(1-terminal)*min twin target at the policy's
/// deterministic action; no entropy term. Used by reward shaping.
Tensor greedy_bootstrap(const TwinCriticParams& target, const PolicyParams& policy,
                        const BatchTensors& batch, const Tensor& latents, double gamma);

/// Mean squared TD error over the batch and both twins.
double sac_critic_loss(const TwinCriticParams& critic, const TwinCriticParams& target,
                       const PolicyParams& policy, const Temperature& temp,
                       const BatchTensors& batch, const Tensor& latents, double gamma,
                       Rng& rng);

/// mean(alpha*log pi(a|s,z) - min twin Q(s,a,z)) with reparameterized actions.
double sac_actor_loss(const TwinCriticParams& critic, const PolicyParams& policy,
                      const Temperature& temp, const Tensor& states, const Tensor& latents,
                      Rng& rng);

/// Gradient step on the twin critics toward the soft TD targets.
double update_critic(SacAgent& agent, const BatchTensors& batch, const Tensor& latents,
                     double gamma, Rng& rng);

struct PolicyUpdateResult {
  double loss = 0.0;
  double mean_log_prob = 0.0;
};

/// Gradient step on the policy; the critics are treated as constants.
PolicyUpdateResult update_policy(SacAgent& agent, const Tensor& states,
                                 const Tensor& latents, Rng& rng);

/// One adaptive step on log_alpha: gradient -(mean_log_prob + target_entropy).
void update_temperature(Temperature& temp, double mean_log_prob);

/// target <- (1-tau)*target + tau*online, componentwise.
void polyak_update(TwinCriticParams& target, const TwinCriticParams& online, double tau);

/// Gradients of the actor loss w.r.t. policy and critic parameter tensors.
/// The critic block is identically zero by the stop-gradient contract.
struct ActorLossGrads {
  std::vector<Tensor> policy;
  std::vector<Tensor> critic;
};
ActorLossGrads actor_loss_gradients(const TwinCriticParams& critic, const PolicyParams& policy,
                                    const Temperature& temp, const Tensor& states,
                                    const Tensor& latents, Rng& rng);

}  // namespace metarl::agents
