#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metarl/rng.hpp"
#include "metarl/tensor.hpp"

namespace metarl::tasks {

enum class Family { point_robot, velocity_match, rand_params_mass };

Family family_from_string(const std::string& s);
std::string to_string(Family f);

/// Hidden parameters of one sampled MDP. Immutable after sampling.
struct TaskSpec {
  Family family;
  std::vector<double> params;  // goal (x,y) | target velocity | (mass, friction)
  int index = 0;
};

struct EnvState {
  std::vector<double> vec;  // position | (position, velocity)
  int step = 0;
};

/// One environment interaction record; the atom of buffers and encoder context.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

std::size_t state_dim(Family f);
std::size_t action_dim(Family f);

inline constexpr int kDefaultHorizon = 20;
inline constexpr double kActionBound = 1.0;  // box is [-1,1] per dimension

/// Draws hidden task parameters from the family's support:
/// point-robot goals uniform on the unit circle, target velocity U[0,1],
/// mass U[0.5,2] with friction U[0.05,0.5].
TaskSpec sample_task(Family family, Rng& rng, int index = 0);

/// All families start at the zero state with step counter 0.
EnvState reset(const TaskSpec& task, Rng& rng);

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

/// Pure transition function. Actions outside the box are clipped (counted in
/// EventCounters::action_clips). Stepping past the horizon is a protocol error.
StepResult step(const TaskSpec& task, const EnvState& state, const Tensor& action,
                int horizon = kDefaultHorizon);

/// Transition assembled from a step; state vectors copied out.
Transition make_transition(const EnvState& s, const Tensor& action, const StepResult& r);

}  // namespace metarl::tasks
