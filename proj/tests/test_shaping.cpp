#include <doctest.h>

#include <cmath>

#include "metarl/logging.hpp"
#include "metarl/shaping.hpp"

using namespace metarl;
using namespace metarl::agents;
using namespace metarl::shaping;

namespace {

TwinCriticParams constant_critic(std::size_t in_dim, double c1, double c2) {
  TwinCriticParams p;
  p.q1.layers.push_back({Tensor({in_dim, 1}), Tensor({1, 1}, {c1}), Activation::identity});
  p.q2.layers.push_back({Tensor({in_dim, 1}), Tensor({1, 1}, {c2}), Activation::identity});
  return p;
}

PolicyParams linear_policy(Rng& rng, std::size_t in_dim, std::size_t a_dim) {
  PolicyParams p;
  p.net.layers.push_back({rng.normal_tensor({in_dim, 2 * a_dim}, 0.3),
                          rng.normal_tensor({1, 2 * a_dim}, 0.1), Activation::identity});
  p.action_dim = a_dim;
  return p;
}

tasks::Transition sample_transition(Rng& rng) {
  tasks::Transition t;
  t.state = {rng.normal(), rng.normal()};
  t.action = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  t.reward = rng.normal();
  t.next_state = {rng.normal(), rng.normal()};
  t.terminal = false;
  return t;
}

BatchTensors batch_of(const std::vector<tasks::Transition>& ts) {
  BatchTensors b;
  std::size_t n = ts.size();
  b.states = Tensor({n, 2});
  b.actions = Tensor({n, 2});
  b.rewards = Tensor({n, 1});
  b.next_states = Tensor({n, 2});
  b.terminals = Tensor({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      b.states.at(r, c) = ts[r].state[c];
      b.actions.at(r, c) = ts[r].action[c];
      b.next_states.at(r, c) = ts[r].next_state[c];
    }
    b.rewards.at(r, 0) = ts[r].reward;
    b.terminals.at(r, 0) = ts[r].terminal ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace

TEST_CASE("shaped_reward: zero on a Bellman-consistent transition") {
  // gamma = 0 and a critic that outputs exactly the stored reward
  Rng rng(1);
  TwinCriticParams critic = constant_critic(7, 0.7, 0.7);
  PolicyParams policy = linear_policy(rng, 5, 2);
  tasks::Transition tr = sample_transition(rng);
  tr.reward = 0.7;
  double r = shaped_reward(critic, critic, policy, tr, Tensor::row({0.0, 0.0, 0.0}), 1.0,
                           /*gamma=*/0.0);
  CHECK(r == 0.0);
}

TEST_CASE("shaped_reward: linear in the reward scale") {
  Rng rng(2);
  SacAgent agent = make_agent(
      AgentConfig{.state_dim = 2, .action_dim = 2, .latent_dim = 3, .hidden = 8}, rng);
  for (int inst = 0; inst < 50; ++inst) {
    tasks::Transition tr = sample_transition(rng);
    Tensor z = rng.normal_tensor({1, 3});
    double lambda = rng.uniform(0.1, 3.0);
    double r1 = shaped_reward(agent.critic, agent.target, agent.policy, tr, z, lambda, 0.99);
    double r2 =
        shaped_reward(agent.critic, agent.target, agent.policy, tr, z, 2.0 * lambda, 0.99);
    CHECK(std::abs(r2 - 2.0 * r1) <= 1e-12 * std::max(1.0, std::abs(r2)));
  }
}

TEST_CASE("shaped_reward: matches a scripted |Q - (r + gamma Q')| oracle") {
  Rng rng(3);
  TwinCriticParams critic;
  critic.q1.layers.push_back(
      {rng.normal_tensor({7, 1}, 0.4), Tensor({1, 1}, {0.2}), Activation::identity});
  critic.q2.layers.push_back(
      {rng.normal_tensor({7, 1}, 0.4), Tensor({1, 1}, {-0.1}), Activation::identity});
  TwinCriticParams target;
  target.q1.layers.push_back(
      {rng.normal_tensor({7, 1}, 0.4), Tensor({1, 1}, {0.3}), Activation::identity});
  target.q2.layers.push_back(
      {rng.normal_tensor({7, 1}, 0.4), Tensor({1, 1}, {0.05}), Activation::identity});
  PolicyParams policy = linear_policy(rng, 5, 2);
  tasks::Transition tr = sample_transition(rng);
  Tensor z = rng.normal_tensor({1, 3});
  const double gamma = 0.9, lambda = 1.7;

  double got = shaped_reward(critic, target, policy, tr, z, lambda, gamma);

  auto linear = [&](const MlpParams& net, const double* in, std::size_t n, std::size_t c) {
    double acc = net.layers[0].bias[c];
    for (std::size_t k = 0; k < n; ++k) acc += in[k] * net.layers[0].weight.at(k, c);
    return acc;
  };
  double pin[5] = {tr.next_state[0], tr.next_state[1], z[0], z[1], z[2]};
  double a_next[2];
  for (int c = 0; c < 2; ++c) a_next[c] = std::tanh(linear(policy.net, pin, 5, c));
  double qin_next[7] = {tr.next_state[0], tr.next_state[1], a_next[0], a_next[1],
                        z[0],             z[1],             z[2]};
  double boot = tr.reward + gamma * std::min(linear(target.q1, qin_next, 7, 0),
                                             linear(target.q2, qin_next, 7, 0));
  double qin[7] = {tr.state[0], tr.state[1], tr.action[0], tr.action[1], z[0], z[1], z[2]};
  double q = std::min(linear(critic.q1, qin, 7, 0), linear(critic.q2, qin, 7, 0));
  CHECK(std::abs(got - lambda * std::abs(q - boot)) < 1e-10);
}

TEST_CASE("shaped_reward: non-negative on random instances") {
  Rng rng(4);
  SacAgent agent = make_agent(
      AgentConfig{.state_dim = 2, .action_dim = 2, .latent_dim = 3, .hidden = 8}, rng);
  for (int i = 0; i < 2000; ++i) {
    tasks::Transition tr = sample_transition(rng);
    Tensor z = rng.normal_tensor({1, 3});
    CHECK(shaped_reward(agent.critic, agent.target, agent.policy, tr, z,
                        rng.uniform(0.0, 5.0), 0.99) >= 0.0);
  }
}

TEST_CASE("relabel_explorer_batch: Bellman-consistent batch relabels to zero") {
  Rng rng(5);
  TwinCriticParams critic = constant_critic(7, 0.4, 0.4);
  PolicyParams policy = linear_policy(rng, 5, 2);
  std::vector<tasks::Transition> ts(5, sample_transition(rng));
  for (auto& t : ts) t.reward = 0.4;
  BatchTensors batch = batch_of(ts);
  std::vector<int> task_of(5, 3);
  std::unordered_map<int, Tensor> latents{{3, Tensor({1, 3})}};
  BatchTensors out = relabel_explorer_batch(batch, task_of, latents, 3, critic, critic,
                                            policy, 1.0, 0.0, rng);
  for (std::size_t r = 0; r < 5; ++r) CHECK(out.rewards.at(r, 0) == 0.0);
}

TEST_CASE("relabel_explorer_batch: pure function of its inputs") {
  Rng rng(6);
  SacAgent agent = make_agent(
      AgentConfig{.state_dim = 2, .action_dim = 2, .latent_dim = 3, .hidden = 8}, rng);
  std::vector<tasks::Transition> ts;
  for (int i = 0; i < 6; ++i) ts.push_back(sample_transition(rng));
  BatchTensors batch = batch_of(ts);
  std::vector<int> task_of{0, 0, 1, 1, 2, 2};
  std::unordered_map<int, Tensor> latents;
  for (int t = 0; t < 3; ++t) latents.emplace(t, rng.normal_tensor({1, 3}));
  Rng r1(9), r2(9);
  BatchTensors o1 = relabel_explorer_batch(batch, task_of, latents, 3, agent.critic,
                                           agent.target, agent.policy, 1.3, 0.99, r1);
  BatchTensors o2 = relabel_explorer_batch(batch, task_of, latents, 3, agent.critic,
                                           agent.target, agent.policy, 1.3, 0.99, r2);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(o1.rewards.at(r, 0) == o2.rewards.at(r, 0));
    CHECK(o1.rewards.at(r, 0) >= 0.0);
    // environment rewards in the source batch untouched
    CHECK(batch.rewards.at(r, 0) == batch_of(ts).rewards.at(r, 0));
  }
}

TEST_CASE("relabel_explorer_batch: shaped rewards respond to the latent") {
  Rng rng(7);
  // critic with a strong latent column so Q depends on z
  TwinCriticParams critic;
  Tensor w({7, 1});
  w.at(4, 0) = 5.0;  // first latent channel
  critic.q1.layers.push_back({w, Tensor({1, 1}), Activation::identity});
  critic.q2.layers.push_back({w, Tensor({1, 1}), Activation::identity});
  PolicyParams policy = linear_policy(rng, 5, 2);
  std::vector<tasks::Transition> ts{sample_transition(rng)};
  BatchTensors batch = batch_of(ts);
  std::vector<int> task_of{0};
  std::unordered_map<int, Tensor> za{{0, Tensor({1, 3}, {1.0, 0.0, 0.0})}};
  std::unordered_map<int, Tensor> zb{{0, Tensor({1, 3}, {-1.0, 0.0, 0.0})}};
  BatchTensors oa = relabel_explorer_batch(batch, task_of, za, 3, critic, critic, policy,
                                           1.0, 0.0, rng);
  BatchTensors ob = relabel_explorer_batch(batch, task_of, zb, 3, critic, critic, policy,
                                           1.0, 0.0, rng);
  CHECK(std::abs(oa.rewards[0] - ob.rewards[0]) > 1e-6);
}

TEST_CASE("relabel_explorer_batch: missing belief falls back to the prior and is counted") {
  EventCounters::reset();
  Rng rng(8);
  SacAgent agent = make_agent(
      AgentConfig{.state_dim = 2, .action_dim = 2, .latent_dim = 3, .hidden = 8}, rng);
  std::vector<tasks::Transition> ts{sample_transition(rng), sample_transition(rng)};
  BatchTensors batch = batch_of(ts);
  std::vector<int> task_of{0, 7};  // task 7 has no belief
  std::unordered_map<int, Tensor> latents{{0, Tensor({1, 3})}};
  BatchTensors out = relabel_explorer_batch(batch, task_of, latents, 3, agent.critic,
                                            agent.target, agent.policy, 1.0, 0.99, rng);
  CHECK(EventCounters::prior_fallbacks.load() == 1);
  CHECK(out.rewards.size() == 2);
}
