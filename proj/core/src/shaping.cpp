#include "metarl/shaping.hpp"

#include <cmath>

#include "metarl/logging.hpp"

namespace metarl::shaping {

Tensor shaped_rewards(const agents::TwinCriticParams& critic,
                      const agents::TwinCriticParams& target,
                      const agents::PolicyParams& policy, const agents::BatchTensors& batch,
                      const Tensor& latents, double scale, double gamma) {
  if (scale < 0.0) throw ConfigError("reward scale must be non-negative");
  Tensor bootstrap = agents::greedy_bootstrap(target, policy, batch, latents, gamma);
  auto [q1, q2] = agents::q_values(critic, batch.states, batch.actions, latents);
  Tensor out({batch.size(), 1});
  for (std::size_t r = 0; r < batch.size(); ++r) {
    double q = std::min(q1.at(r, 0), q2.at(r, 0));
    out.at(r, 0) = scale * std::abs(q - bootstrap.at(r, 0));
  }
  return out;
}

double shaped_reward(const agents::TwinCriticParams& critic,
                     const agents::TwinCriticParams& target,
                     const agents::PolicyParams& policy, const tasks::Transition& transition,
                     const Tensor& latent, double scale, double gamma) {
  agents::BatchTensors batch;
  batch.states = Tensor::row(transition.state);
  batch.actions = Tensor::row(transition.action);
  batch.rewards = Tensor::scalar(transition.reward);
  batch.next_states = Tensor::row(transition.next_state);
  batch.terminals = Tensor::scalar(transition.terminal ? 1.0 : 0.0);
  return shaped_rewards(critic, target, policy, batch, latent, scale, gamma)[0];
}

agents::BatchTensors relabel_explorer_batch(
    const agents::BatchTensors& batch, std::span<const int> task_of_row,
    const std::unordered_map<int, Tensor>& latent_by_task, std::size_t latent_dim,
    const agents::TwinCriticParams& critic, const agents::TwinCriticParams& target,
    const agents::PolicyParams& policy, double scale, double gamma, Rng& rng) {
  if (task_of_row.size() != batch.size()) {
    throw ShapeError("relabel: " + std::to_string(task_of_row.size()) + " task ids for " +
                     std::to_string(batch.size()) + " transitions");
  }
  Tensor latents({batch.size(), latent_dim});
  std::unordered_map<int, Tensor> fallback;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    auto it = latent_by_task.find(task_of_row[r]);
    const Tensor* z = nullptr;
    if (it != latent_by_task.end()) {
      z = &it->second;
    } else {
      auto [fit, fresh] = fallback.try_emplace(task_of_row[r]);
      if (fresh) {
        EventCounters::prior_fallbacks.fetch_add(1, std::memory_order_relaxed);
        fit->second = rng.normal_tensor({1, latent_dim});
      }
      z = &fit->second;
    }
    for (std::size_t c = 0; c < latent_dim; ++c) latents.at(r, c) = z->operator[](c);
  }
  agents::BatchTensors out = batch;
  out.rewards = shaped_rewards(critic, target, policy, out, latents, scale, gamma);
  return out;
}

}  // namespace metarl::shaping
