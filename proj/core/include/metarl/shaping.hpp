#pragma once

#include <unordered_map>

#include "metarl/agents.hpp"
#include "metarl/encoder.hpp"
#include "metarl/tasks.hpp"

namespace metarl::shaping {

/// Explorer reward for one transition: scale * |Q(s,a,z) - (r + gamma * max_a' Q(s',a',z))|,
/// the absolute soft-Bellman residual of the actor's critic. The bootstrap
/// uses the actor's deterministic action at s' through the target critic
/// (min of twins), with no entropy term.
double shaped_reward(const agents::TwinCriticParams& critic,
                     const agents::TwinCriticParams& target,
                     const agents::PolicyParams& policy, const tasks::Transition& transition,
                     const Tensor& latent, double scale, double gamma);

/// Batch form; latents has one row per transition. Returns [n, 1].
Tensor shaped_rewards(const agents::TwinCriticParams& critic,
                      const agents::TwinCriticParams& target,
                      const agents::PolicyParams& policy, const agents::BatchTensors& batch,
                      const Tensor& latents, double scale, double gamma);

/// Replaces (not mixes) the environment rewards of an explorer batch with
/// shaped rewards computed from the current critic and per-task latents.
/// Rows whose task has no belief fall back to a latent drawn from the
/// N(0, I) prior (counted in EventCounters::prior_fallbacks).
agents::BatchTensors relabel_explorer_batch(
    const agents::BatchTensors& batch, std::span<const int> task_of_row,
    const std::unordered_map<int, Tensor>& latent_by_task, std::size_t latent_dim,
    const agents::TwinCriticParams& critic, const agents::TwinCriticParams& target,
    const agents::PolicyParams& policy, double scale, double gamma, Rng& rng);

}  // namespace metarl::shaping
