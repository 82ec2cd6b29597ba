#include "metarl/agents.hpp"

#include <cmath>

namespace metarl::agents {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kLog2 = 0.6931471805599453;

// tanh saturates to exactly +-1.0 in floats for |u| > ~19; keep sampled
// actions strictly inside the open box.
constexpr double kBoxMargin = 1e-12;

Tensor concat2(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out.at(r, a.cols() + c) = b.at(r, c);
  }
  return out;
}

Tensor concat3(const Tensor& a, const Tensor& b, const Tensor& c) {
  return concat2(concat2(a, b), c);
}

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

/// log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)); exact and overflow-safe.
double log_one_minus_tanh_sq(double u) {
  double sp = std::max(-2.0 * u, 0.0) + std::log1p(std::exp(-std::abs(2.0 * u)));
  return 2.0 * (kLog2 - u - sp);
}

struct PolicyHead {
  Tensor mean;     // [n, a]
  Tensor log_std;  // [n, a], clamped
};

PolicyHead policy_head(const PolicyParams& policy, const Tensor& states,
                       const Tensor& latents) {
  Tensor out = mlp_forward(policy.net, concat2(states, latents));
  std::size_t a = policy.action_dim;
  PolicyHead h{Tensor({out.rows(), a}), Tensor({out.rows(), a})};
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < a; ++c) {
      h.mean.at(r, c) = out.at(r, c);
      h.log_std.at(r, c) = clampd(out.at(r, a + c), kLogStdMin, kLogStdMax);
    }
  }
  return h;
}

}  // namespace

SacAgent make_agent(const AgentConfig& cfg, Rng& rng) {
  if (cfg.state_dim == 0 || cfg.action_dim == 0) {
    throw ConfigError("agent state_dim/action_dim must be set");
  }
  SacAgent agent;
  std::vector<std::size_t> pol{cfg.state_dim + cfg.latent_dim};
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) pol.push_back(cfg.hidden);
  pol.push_back(2 * cfg.action_dim);
  agent.policy.net = make_mlp(pol, Activation::tanh, Activation::identity, rng, 1e-3);
  agent.policy.action_dim = cfg.action_dim;

  std::vector<std::size_t> cr{cfg.state_dim + cfg.action_dim + cfg.latent_dim};
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) cr.push_back(cfg.hidden);
  cr.push_back(1);
  agent.critic.q1 = make_mlp(cr, Activation::tanh, Activation::identity, rng, 3e-3);
  agent.critic.q2 = make_mlp(cr, Activation::tanh, Activation::identity, rng, 3e-3);
  agent.target = agent.critic;

  agent.temp.log_alpha = Tensor::scalar(0.0);
  agent.temp.target_entropy =
      -cfg.target_entropy_scale * static_cast<double>(cfg.action_dim);
  agent.temp.opt = AdamState(cfg.optim);
  agent.policy_opt = AdamState(cfg.optim);
  agent.critic_opt = AdamState(cfg.optim);
  return agent;
}

PolicySample policy_sample(const PolicyParams& policy, const Tensor& states,
                           const Tensor& latents, Rng& rng, bool deterministic) {
  PolicyHead h = policy_head(policy, states, latents);
  std::size_t n = h.mean.rows(), a = policy.action_dim;
  PolicySample out{Tensor({n, a}), Tensor({n, 1})};
  for (std::size_t r = 0; r < n; ++r) {
    double logp = 0.0;
    for (std::size_t c = 0; c < a; ++c) {
      double eps = deterministic ? 0.0 : rng.normal();
      double sd = std::exp(h.log_std.at(r, c));
      double u = h.mean.at(r, c) + sd * eps;
      out.actions.at(r, c) = clampd(std::tanh(u), -1.0 + kBoxMargin, 1.0 - kBoxMargin);
      logp += -0.5 * eps * eps - h.log_std.at(r, c) - 0.5 * kLog2Pi -
              log_one_minus_tanh_sq(u);
    }
    out.log_probs.at(r, 0) = logp;
  }
  return out;
}

Tensor policy_log_prob(const PolicyParams& policy, const Tensor& states,
                       const Tensor& latents, const Tensor& actions) {
  PolicyHead h = policy_head(policy, states, latents);
  std::size_t n = h.mean.rows(), a = policy.action_dim;
  Tensor logp({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < a; ++c) {
      double act = clampd(actions.at(r, c), -1.0 + 1e-12, 1.0 - 1e-12);
      double u = std::atanh(act);
      double sd = std::exp(h.log_std.at(r, c));
      double zn = (u - h.mean.at(r, c)) / sd;
      s += -0.5 * zn * zn - h.log_std.at(r, c) - 0.5 * kLog2Pi - log_one_minus_tanh_sq(u);
    }
    logp.at(r, 0) = s;
  }
  return logp;
}

std::pair<Tensor, Tensor> q_values(const TwinCriticParams& critic, const Tensor& states,
                                   const Tensor& actions, const Tensor& latents) {
  Tensor in = concat3(states, actions, latents);
  return {mlp_forward(critic.q1, in), mlp_forward(critic.q2, in)};
}

std::pair<double, double> q_value(const TwinCriticParams& critic, const Tensor& state,
                                  const Tensor& action, const Tensor& latent) {
  auto [q1, q2] = q_values(critic, state, action, latent);
  return {q1[0], q2[0]};
}

Tensor td_targets(const TwinCriticParams& target, const PolicyParams& policy, double alpha,
                  const BatchTensors& batch, const Tensor& latents, double gamma, Rng& rng) {
  PolicySample next = policy_sample(policy, batch.next_states, latents, rng);
  auto [q1, q2] = q_values(target, batch.next_states, next.actions, latents);
  Tensor y({batch.size(), 1});
  for (std::size_t r = 0; r < batch.size(); ++r) {
    double soft = std::min(q1.at(r, 0), q2.at(r, 0)) - alpha * next.log_probs.at(r, 0);
    y.at(r, 0) = batch.rewards.at(r, 0) +
                 gamma * (1.0 - batch.terminals.at(r, 0)) * soft;
  }
  return y;
}

Tensor greedy_bootstrap(const TwinCriticParams& target, const PolicyParams& policy,
                        const BatchTensors& batch, const Tensor& latents, double gamma) {
  Rng unused(0);
  PolicySample next =
      policy_sample(policy, batch.next_states, latents, unused, /*deterministic=*/true);
  auto [q1, q2] = q_values(target, batch.next_states, next.actions, latents);
  Tensor y({batch.size(), 1});
  for (std::size_t r = 0; r < batch.size(); ++r) {
    y.at(r, 0) = batch.rewards.at(r, 0) +
                 gamma * (1.0 - batch.terminals.at(r, 0)) *
                     std::min(q1.at(r, 0), q2.at(r, 0));
  }
  return y;
}

double sac_critic_loss(const TwinCriticParams& critic, const TwinCriticParams& target,
                       const PolicyParams& policy, const Temperature& temp,
                       const BatchTensors& batch, const Tensor& latents, double gamma,
                       Rng& rng) {
  Tensor y = td_targets(target, policy, temp.alpha(), batch, latents, gamma, rng);
  auto [q1, q2] = q_values(critic, batch.states, batch.actions, latents);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    double d1 = q1.at(r, 0) - y.at(r, 0);
    double d2 = q2.at(r, 0) - y.at(r, 0);
    loss += 0.5 * (d1 * d1 + d2 * d2);
  }
  return loss / static_cast<double>(batch.size());
}

namespace {

/// Differentiable actor loss on a fresh tape. The critics enter as constants,
/// so no gradient reaches them; returns the tape, loss value and policy vars.
struct ActorLossTape {
  Tape tape;
  MlpVars policy_vars;
  MlpVars q1_vars, q2_vars;
  Value loss;
  double mean_log_prob = 0.0;
};

void build_actor_loss(ActorLossTape& t, const TwinCriticParams& critic,
                      const PolicyParams& policy, double alpha, const Tensor& states,
                      const Tensor& latents, Rng& rng, bool critic_requires_grad) {
  std::size_t n = states.rows(), a = policy.action_dim;
  Tape& tape = t.tape;
  t.policy_vars = lift_mlp(tape, policy.net, /*requires_grad=*/true);
  t.q1_vars = lift_mlp(tape, critic.q1, critic_requires_grad);
  t.q2_vars = lift_mlp(tape, critic.q2, critic_requires_grad);

  Value input = tape.constant(concat2(states, latents));
  Value head = mlp_apply(t.policy_vars, input);
  Value mean = slice_cols(head, 0, a);
  Value log_std = clamp_v(slice_cols(head, a, 2 * a), kLogStdMin, kLogStdMax);
  Tensor noise({n, a});
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
  Value u = gaussian_sample_reparam(mean, log_std, tape.constant(noise));
  Value actions = clamp_v(tanh_v(u), -1.0 + kBoxMargin, 1.0 - kBoxMargin);

  // log pi(a|s,z): Gaussian term with (u-mean)/std == noise, plus tanh correction
  Value half_noise_sq = tape.constant([&] {
    Tensor c({n, a});
    for (std::size_t i = 0; i < c.size(); ++i)
      c[i] = -0.5 * noise[i] * noise[i] - 0.5 * kLog2Pi - 2.0 * kLog2;
    return c;
  }());
  Value correction = add(scale(u, 2.0), scale(softplus_v(scale(u, -2.0)), 2.0));
  Value per_dim = add(add(half_noise_sq, neg(log_std)), correction);
  Value log_probs = matmul(per_dim, tape.constant(Tensor::full({a, 1}, 1.0)));  // [n,1]

  Value q_in = concat_cols({tape.constant(states), actions, tape.constant(latents)});
  Value q1 = mlp_apply(t.q1_vars, q_in);
  Value q2 = mlp_apply(t.q2_vars, q_in);
  Value q_min = minimum(q1, q2);
  t.loss = mean_all(sub(scale(log_probs, alpha), q_min));
  t.mean_log_prob = tape.value(log_probs).sum() / static_cast<double>(n);
}

}  // namespace

double sac_actor_loss(const TwinCriticParams& critic, const PolicyParams& policy,
                      const Temperature& temp, const Tensor& states, const Tensor& latents,
                      Rng& rng) {
  ActorLossTape t;
  build_actor_loss(t, critic, policy, temp.alpha(), states, latents, rng,
                   /*critic_requires_grad=*/false);
  return t.tape.value(t.loss)[0];
}

ActorLossGrads actor_loss_gradients(const TwinCriticParams& critic, const PolicyParams& policy,
                                    const Temperature& temp, const Tensor& states,
                                    const Tensor& latents, Rng& rng) {
  ActorLossTape t;
  build_actor_loss(t, critic, policy, temp.alpha(), states, latents, rng,
                   /*critic_requires_grad=*/false);
  t.tape.backward(t.loss);
  ActorLossGrads out;
  out.policy = mlp_grads(t.tape, t.policy_vars);
  for (const Tensor& g : mlp_grads(t.tape, t.q1_vars)) out.critic.push_back(g);
  for (const Tensor& g : mlp_grads(t.tape, t.q2_vars)) out.critic.push_back(g);
  return out;
}

double update_critic(SacAgent& agent, const BatchTensors& batch, const Tensor& latents,
                     double gamma, Rng& rng) {
  Tensor y =
      td_targets(agent.target, agent.policy, agent.temp.alpha(), batch, latents, gamma, rng);
  Tape tape;
  MlpVars q1_vars = lift_mlp(tape, agent.critic.q1);
  MlpVars q2_vars = lift_mlp(tape, agent.critic.q2);
  Value in = tape.constant(concat3(batch.states, batch.actions, latents));
  Value d1 = sub(mlp_apply(q1_vars, in), tape.constant(y));
  Value d2 = sub(mlp_apply(q2_vars, in), tape.constant(y));
  Value loss = scale(add(mean_all(mul(d1, d1)), mean_all(mul(d2, d2))), 0.5);
  tape.backward(loss);

  std::vector<Tensor> grads = mlp_grads(tape, q1_vars);
  for (Tensor& g : mlp_grads(tape, q2_vars)) grads.push_back(std::move(g));
  std::vector<Tensor*> refs = param_refs(agent.critic.q1);
  for (Tensor* p : param_refs(agent.critic.q2)) refs.push_back(p);
  agent.critic_opt.step(refs, grads);
  return tape.value(loss)[0];
}

PolicyUpdateResult update_policy(SacAgent& agent, const Tensor& states,
                                 const Tensor& latents, Rng& rng) {
  ActorLossTape t;
  build_actor_loss(t, agent.critic, agent.policy, agent.temp.alpha(), states, latents, rng,
                   /*critic_requires_grad=*/false);
  t.tape.backward(t.loss);
  std::vector<Tensor> grads = mlp_grads(t.tape, t.policy_vars);
  std::vector<Tensor*> refs = param_refs(agent.policy.net);
  agent.policy_opt.step(refs, grads);
  return {t.tape.value(t.loss)[0], t.mean_log_prob};
}

void update_temperature(Temperature& temp, double mean_log_prob) {
  Tensor g = Tensor::scalar(-(mean_log_prob + temp.target_entropy));
  Tensor* refs[] = {&temp.log_alpha};
  temp.opt.step(refs, {&g, 1});
}

void polyak_update(TwinCriticParams& target, const TwinCriticParams& online, double tau) {
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("polyak tau must be in (0, 1]");
  auto blend = [tau](MlpParams& dst, const MlpParams& src) {
    auto d = param_refs(dst);
    auto s = param_refs(src);
    for (std::size_t i = 0; i < d.size(); ++i) {
      check_same_shape(*d[i], *s[i], "polyak");
      for (std::size_t k = 0; k < d[i]->size(); ++k)
        (*d[i])[k] = (1.0 - tau) * (*d[i])[k] + tau * (*s[i])[k];
    }
  };
  blend(target.q1, online.q1);
  blend(target.q2, online.q2);
}

}  // namespace metarl::agents
