#include <doctest.h>

#include <cmath>

#include "metarl/logging.hpp"
#include "metarl/tasks.hpp"

using namespace metarl;
using namespace metarl::tasks;

TEST_CASE("sample_task: deterministic given the seed") {
  Rng a(42), b(42);
  for (auto fam : {Family::point_robot, Family::velocity_match, Family::rand_params_mass}) {
    TaskSpec t1 = sample_task(fam, a);
    TaskSpec t2 = sample_task(fam, b);
    REQUIRE(t1.params.size() == t2.params.size());
    for (std::size_t i = 0; i < t1.params.size(); ++i) CHECK(t1.params[i] == t2.params[i]);
  }
}

TEST_CASE("sample_task: point-robot goals sit on the unit circle") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    TaskSpec t = sample_task(Family::point_robot, rng);
    double n = std::sqrt(t.params[0] * t.params[0] + t.params[1] * t.params[1]);
    CHECK(std::abs(n - 1.0) < 1e-12);
  }
}

TEST_CASE("sample_task: velocity targets are uniform on [0,1]") {
  Rng rng(2);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    TaskSpec t = sample_task(Family::velocity_match, rng);
    REQUIRE(t.params[0] >= 0.0);
    REQUIRE(t.params[0] <= 1.0);
    sum += t.params[0];
  }
  CHECK(std::abs(sum / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("sample_task: rand-params support bounds") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    TaskSpec t = sample_task(Family::rand_params_mass, rng);
    CHECK(t.params[0] >= 0.5);
    CHECK(t.params[0] <= 2.0);
    CHECK(t.params[1] >= 0.05);
    CHECK(t.params[1] <= 0.5);
  }
}

TEST_CASE("reset: zero state, zero step counter, deterministic") {
  Rng rng(4);
  for (auto fam : {Family::point_robot, Family::velocity_match, Family::rand_params_mass}) {
    TaskSpec t = sample_task(fam, rng);
    Rng r1(9), r2(9);
    EnvState s1 = reset(t, r1);
    EnvState s2 = reset(t, r2);
    CHECK(s1.step == 0);
    REQUIRE(s1.vec.size() == state_dim(fam));
    for (std::size_t i = 0; i < s1.vec.size(); ++i) {
      CHECK(s1.vec[i] == 0.0);
      CHECK(s1.vec[i] == s2.vec[i]);
    }
  }
}

TEST_CASE("step: point-robot arithmetic") {
  TaskSpec t{Family::point_robot, {1.0, 0.0}, 0};
  EnvState s{{0.0, 0.0}, 0};
  StepResult r = step(t, s, Tensor::row({1.0, 0.0}));
  CHECK(r.next.vec[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r.next.vec[1] == 0.0);
  CHECK(r.reward == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK_FALSE(r.done);
}

TEST_CASE("step: at the goal with zero action the reward is the per-step maximum") {
  TaskSpec t{Family::point_robot, {0.5, 0.5}, 0};
  EnvState s{{0.5, 0.5}, 3};
  StepResult r = step(t, s, Tensor::row({0.0, 0.0}));
  CHECK(r.reward == 0.0);
}

TEST_CASE("step: rand-params-mass arithmetic") {
  TaskSpec t{Family::rand_params_mass, {1.0, 0.1}, 0};
  EnvState s{{0.0, 0.0}, 0};
  StepResult r = step(t, s, Tensor::row({1.0}));
  CHECK(r.next.vec[1] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r.reward == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("step: velocity-match arithmetic") {
  TaskSpec t{Family::velocity_match, {0.4}, 0};
  EnvState s{{0.0, 0.5}, 0};
  StepResult r = step(t, s, Tensor::row({1.0}));
  // v' = 0.9*0.5 + 0.1*1 = 0.55, pos += v', r = -|0.55-0.4| - 0.01
  CHECK(r.next.vec[1] == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(r.next.vec[0] == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(r.reward == doctest::Approx(-0.15 - 0.01).epsilon(1e-12));
}

TEST_CASE("step: actions outside the box are clipped and counted") {
  EventCounters::reset();
  TaskSpec t{Family::point_robot, {1.0, 0.0}, 0};
  EnvState s{{0.0, 0.0}, 0};
  StepResult r = step(t, s, Tensor::row({4.0, 0.0}));
  CHECK(r.next.vec[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(EventCounters::action_clips.load() == 1);
}

TEST_CASE("step: position clipped to the arena") {
  TaskSpec t{Family::point_robot, {1.0, 0.0}, 0};
  EnvState s{{1.45, 0.0}, 0};
  StepResult r = step(t, s, Tensor::row({1.0, 0.0}));
  CHECK(r.next.vec[0] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("step: done exactly at the horizon, stepping past it is a protocol error") {
  TaskSpec t{Family::point_robot, {1.0, 0.0}, 0};
  Rng rng(5);
  EnvState s = reset(t, rng);
  for (int i = 0; i < kDefaultHorizon; ++i) {
    StepResult r = step(t, s, Tensor::row({0.1, 0.1}));
    CHECK(r.done == (i == kDefaultHorizon - 1));
    s = r.next;
  }
  CHECK_THROWS_AS(step(t, s, Tensor::row({0.1, 0.1})), ProtocolError);
}

TEST_CASE("invariant: reward-varying families share the transition function") {
  Rng rng(6);
  for (auto fam : {Family::point_robot, Family::velocity_match}) {
    TaskSpec t1 = sample_task(fam, rng);
    TaskSpec t2 = sample_task(fam, rng);
    EnvState s1 = reset(t1, rng), s2 = reset(t2, rng);
    for (int i = 0; i < kDefaultHorizon; ++i) {
      Tensor a({1, action_dim(fam)});
      for (std::size_t k = 0; k < a.size(); ++k) a[k] = rng.uniform(-1.0, 1.0);
      StepResult r1 = step(t1, s1, a);
      StepResult r2 = step(t2, s2, a);
      for (std::size_t k = 0; k < r1.next.vec.size(); ++k)
        CHECK(r1.next.vec[k] == r2.next.vec[k]);
      s1 = r1.next;
      s2 = r2.next;
    }
  }
}

TEST_CASE("invariant: transition-varying family shares the reward function") {
  // reward depends only on s' for rand-params-mass
  Rng rng(7);
  TaskSpec t1 = sample_task(Family::rand_params_mass, rng);
  TaskSpec t2 = sample_task(Family::rand_params_mass, rng);
  EnvState s{{0.3, 0.2}, 0};
  Tensor a = Tensor::row({0.5});
  StepResult r1 = step(t1, s, a);
  StepResult r2 = step(t2, s, a);
  CHECK(r1.reward == doctest::Approx(r1.next.vec[1]).epsilon(1e-15));
  CHECK(r2.reward == doctest::Approx(r2.next.vec[1]).epsilon(1e-15));
}

TEST_CASE("invariant: step is pure") {
  TaskSpec t{Family::point_robot, {0.0, 1.0}, 0};
  EnvState s{{0.2, -0.1}, 5};
  Tensor a = Tensor::row({0.3, 0.4});
  StepResult r1 = step(t, s, a);
  StepResult r2 = step(t, s, a);
  CHECK(r1.next.vec[0] == r2.next.vec[0]);
  CHECK(r1.next.vec[1] == r2.next.vec[1]);
  CHECK(r1.reward == r2.reward);
  CHECK(s.vec[0] == 0.2);  // input untouched
  CHECK(s.step == 5);
}

TEST_CASE("unknown family string is a configuration error") {
  CHECK_THROWS_AS(family_from_string("half-cheetah"), ConfigError);
}
