#include "metarl/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "metarl/logging.hpp"

namespace metarl::tasks {

Family family_from_string(const std::string& s) {
  if (s == "point-robot" || s == "point_robot") return Family::point_robot;
  if (s == "velocity-match" || s == "velocity_match") return Family::velocity_match;
  if (s == "rand-params-mass" || s == "rand_params_mass") return Family::rand_params_mass;
  throw ConfigError("unknown task family '" + s + "'");
}

std::string to_string(Family f) {
  switch (f) {
    case Family::point_robot: return "point-robot";
    case Family::velocity_match: return "velocity-match";
    case Family::rand_params_mass: return "rand-params-mass";
  }
  return "?";
}

std::size_t state_dim(Family f) { return f == Family::point_robot ? 2 : 2; }

std::size_t action_dim(Family f) { return f == Family::point_robot ? 2 : 1; }

TaskSpec sample_task(Family family, Rng& rng, int index) {
  TaskSpec t;
  t.family = family;
  t.index = index;
  switch (family) {
    case Family::point_robot: {
      double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      t.params = {std::cos(angle), std::sin(angle)};
      break;
    }
    case Family::velocity_match:
      t.params = {rng.uniform(0.0, 1.0)};
      break;
    case Family::rand_params_mass:
      t.params = {rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.5)};
      break;
  }
  return t;
}

EnvState reset(const TaskSpec& task, Rng&) {
  return EnvState{std::vector<double>(state_dim(task.family), 0.0), 0};
}

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

std::vector<double> clip_action(const Tensor& action, std::size_t dim) {
  if (action.size() != dim) {
    throw ShapeError("action extent " + std::to_string(action.size()) +
                     " does not match family action dimension " + std::to_string(dim));
  }
  std::vector<double> a(dim);
  bool clipped = false;
  for (std::size_t i = 0; i < dim; ++i) {
    a[i] = clip(action[i], -kActionBound, kActionBound);
    clipped = clipped || (a[i] != action[i]);
  }
  if (clipped) EventCounters::action_clips.fetch_add(1, std::memory_order_relaxed);
  return a;
}

}  // namespace

StepResult step(const TaskSpec& task, const EnvState& state, const Tensor& action,
                int horizon) {
  if (state.step >= horizon) {
    throw ProtocolError("step called on a finished episode (step " +
                        std::to_string(state.step) + " >= horizon " +
                        std::to_string(horizon) + ")");
  }
  std::vector<double> a = clip_action(action, action_dim(task.family));
  StepResult out;
  out.next.step = state.step + 1;
  switch (task.family) {
    case Family::point_robot: {
      double nx = clip(state.vec[0] + 0.1 * a[0], -1.5, 1.5);
      double ny = clip(state.vec[1] + 0.1 * a[1], -1.5, 1.5);
      out.next.vec = {nx, ny};
      double dx = nx - task.params[0], dy = ny - task.params[1];
      out.reward = -std::sqrt(dx * dx + dy * dy);
      break;
    }
    case Family::velocity_match: {
      double v = 0.9 * state.vec[1] + 0.1 * a[0];
      double pos = state.vec[0] + v;
      out.next.vec = {pos, v};
      out.reward = -std::abs(v - task.params[0]) - 0.01 * a[0] * a[0];
      break;
    }
    case Family::rand_params_mass: {
      const double dt = 0.1;
      double mass = task.params[0], friction = task.params[1];
      double v = state.vec[1] + (a[0] - friction * state.vec[1]) / mass * dt;
      double pos = state.vec[0] + v * dt;
      out.next.vec = {pos, v};
      out.reward = v;  // reward shared across tasks; dynamics carry the variation
      break;
    }
  }
  out.done = out.next.step >= horizon;
  return out;
}

Transition make_transition(const EnvState& s, const Tensor& action, const StepResult& r) {
  Transition t;
  t.state = s.vec;
  t.action.assign(action.data(), action.data() + action.size());
  for (auto& v : t.action) v = clip(v, -kActionBound, kActionBound);
  t.reward = r.reward;
  t.next_state = r.next.vec;
  t.terminal = r.done;
  return t;
}

}  // namespace metarl::tasks
