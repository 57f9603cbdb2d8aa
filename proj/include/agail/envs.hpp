/*
 Copyright 2026 The AGAIL Lab Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef AGAIL_ENVS_HPP_
#define AGAIL_ENVS_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "agail/numcore.hpp"

namespace agail {

/**
 * Discrete(n) or Box(dim, low, high).
 *
 * Actions are always carried as a Vector: a discrete action is a length-1
 * vector holding the action index. Networks see discrete actions one-hot
 * encoded, see encode().
 */
class ActionSpace {
 public:
  static ActionSpace discrete(int n) {
    if (n < 1) throw InputError("discrete action space needs n >= 1");
    ActionSpace s;
    s.discrete_ = true;
    s.n_ = n;
    return s;
  }

  static ActionSpace box(Vector low, Vector high) {
    if (low.size() != high.size() || low.size() == 0) throw InputError("box bounds must be non-empty and equal length");
    if ((low.array() >= high.array()).any()) throw InputError("box requires low < high componentwise");
    ActionSpace s;
    s.discrete_ = false;
    s.n_ = static_cast<int>(low.size());
    s.low_ = std::move(low);
    s.high_ = std::move(high);
    return s;
  }

  bool is_discrete() const { return discrete_; }
  // Number of choices (discrete) or dimensionality (box).
  int n() const { return n_; }
  // Length of the action vector itself.
  int action_dim() const { return discrete_ ? 1 : n_; }
  // Length of the network-facing encoding.
  int encoded_dim() const { return n_; }
  const Vector& low() const { return low_; }
  const Vector& high() const { return high_; }

  bool contains(const Vector& a) const {
    if (a.size() != action_dim() || !a.allFinite()) return false;
    if (discrete_) {
      const double v = a(0);
      return v == std::floor(v) && v >= 0 && v < n_;
    }
    return (a.array() >= low_.array()).all() && (a.array() <= high_.array()).all();
  }

  Vector clip(const Vector& a) const {
    if (discrete_) return a;
    return a.cwiseMax(low_).cwiseMin(high_);
  }

  Vector encode(const Vector& a) const {
    if (!discrete_) return a;
    Vector e = Vector::Zero(n_);
    e(static_cast<int>(a(0))) = 1.0;
    return e;
  }

  Matrix encode(const Matrix& actions) const {
    if (!discrete_) return actions;
    Matrix e = Matrix::Zero(n_, actions.cols());
    for (Eigen::Index j = 0; j < actions.cols(); ++j) e(static_cast<int>(actions(0, j)), j) = 1.0;
    return e;
  }

  bool operator==(const ActionSpace& o) const {
    if (discrete_ != o.discrete_ || n_ != o.n_) return false;
    return discrete_ || (low_ == o.low_ && high_ == o.high_);
  }

 private:
  bool discrete_ = true;
  int n_ = 1;
  Vector low_, high_;
};

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  // Length of observe(state); what every network consumes.
  int obs_dim = 0;
  ActionSpace action_space;
  int horizon = 1;
  double gamma = 0.995;
};

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool done = false;
};

/// Pure-function MDP: dynamics and rewards depend only on the arguments, so
/// instances can be shared between concurrent rollouts.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Vector reset(Rng& rng) const = 0;
  virtual StepResult step(const Vector& state, const Vector& action) const = 0;
  virtual Vector observe(const Vector& state) const { return state; }

 protected:
  void check_step(const Vector& state, const Vector& action) const {
    if (state.size() != spec().state_dim) throw InputError(spec().name + ": state has wrong dimension");
    if (!spec().action_space.contains(action)) throw InputError(spec().name + ": action outside action space");
  }
};

// Classic cart-pole balancing, CartPole-v0 constants. Actions: 0 pushes
// left, 1 pushes right. State is (x, x_dot, theta, theta_dot).
class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kThetaLimit = 12.0 * 2.0 * std::numbers::pi / 360.0;
  static constexpr double kXLimit = 2.4;

  CartPole() {
    spec_.name = "cartpole";
    spec_.state_dim = 4;
    spec_.obs_dim = 4;
    spec_.action_space = ActionSpace::discrete(2);
    spec_.horizon = 200;
  }

  const EnvSpec& spec() const override { return spec_; }

  Vector reset(Rng& rng) const override {
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    Vector s(4);
    for (int i = 0; i < 4; ++i) s(i) = u(rng);
    return s;
  }

  StepResult step(const Vector& state, const Vector& action) const override {
    check_step(state, action);
    const double x = state(0), x_dot = state(1), theta = state(2), theta_dot = state(3);
    const double force = action(0) == 1.0 ? kForce : -kForce;
    const double total_mass = kCartMass + kPoleMass;
    const double pole_ml = kPoleMass * kHalfLength;
    const double c = std::cos(theta), s = std::sin(theta);
    const double temp = (force + pole_ml * theta_dot * theta_dot * s) / total_mass;
    const double theta_acc =
        (kGravity * s - c * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * c * c / total_mass));
    const double x_acc = temp - pole_ml * theta_acc * c / total_mass;

    StepResult r;
    r.next_state.resize(4);
    r.next_state << x + kDt * x_dot, x_dot + kDt * x_acc, theta + kDt * theta_dot, theta_dot + kDt * theta_acc;
    r.done = std::abs(r.next_state(0)) > kXLimit || std::abs(r.next_state(2)) > kThetaLimit;
    r.reward = 1.0;
    return r;
  }

 private:
  EnvSpec spec_;
};

// Torque-limited pendulum swing-up. theta = 0 is upright; the state keeps
// theta wrapped to [-pi, pi] and theta_dot within +-kMaxSpeed.
class Pendulum final : public Environment {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  Pendulum() {
    spec_.name = "pendulum";
    spec_.state_dim = 2;
    spec_.obs_dim = 3;
    spec_.action_space = ActionSpace::box(Vector::Constant(1, -kMaxTorque), Vector::Constant(1, kMaxTorque));
    spec_.horizon = 200;
  }

  static double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    return std::fmod(std::fmod(a + pi, 2 * pi) + 2 * pi, 2 * pi) - pi;
  }

  const EnvSpec& spec() const override { return spec_; }

  Vector reset(Rng& rng) const override {
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    Vector s(2);
    s(0) = angle(rng);
    s(1) = speed(rng);
    return s;
  }

  StepResult step(const Vector& state, const Vector& action) const override {
    check_step(state, action);
    const double theta = state(0), theta_dot = state(1), u = action(0);
    StepResult r;
    r.reward = -(theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
    const double acc = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta) + 3.0 / (kMass * kLength * kLength) * u;
    const double new_dot = std::clamp(theta_dot + acc * kDt, -kMaxSpeed, kMaxSpeed);
    r.next_state.resize(2);
    r.next_state << wrap_angle(theta + new_dot * kDt), new_dot;
    return r;
  }

  Vector observe(const Vector& state) const override {
    Vector o(3);
    o << std::cos(state(0)), std::sin(state(0)), state(1) / kMaxSpeed;
    return o;
  }

 private:
  EnvSpec spec_;
};

// 2-D double integrator steered toward a fixed goal. State is
// (x, y, vx, vy); actions are accelerations in [-1, 1]^2.
class PointMass final : public Environment {
 public:
  static constexpr double kDt = 0.1;

  explicit PointMass(Vector origin = Vector::Zero(2), Vector goal = Vector::Ones(2))
      : origin_(std::move(origin)), goal_(std::move(goal)) {
    if (origin_.size() != 2 || goal_.size() != 2) throw InputError("pointmass origin and goal are 2-D");
    spec_.name = "pointmass";
    spec_.state_dim = 4;
    spec_.obs_dim = 4;
    spec_.action_space = ActionSpace::box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    spec_.horizon = 100;
  }

  const EnvSpec& spec() const override { return spec_; }
  const Vector& goal() const { return goal_; }

  Vector reset(Rng&) const override {
    Vector s = Vector::Zero(4);
    s.head(2) = origin_;
    return s;
  }

  StepResult step(const Vector& state, const Vector& action) const override {
    check_step(state, action);
    StepResult r;
    r.next_state.resize(4);
    r.next_state.tail(2) = state.tail(2) + kDt * action;
    r.next_state.head(2) = state.head(2) + kDt * r.next_state.tail(2);
    r.reward = -(r.next_state.head(2) - goal_).squaredNorm();
    return r;
  }

 private:
  EnvSpec spec_;
  Vector origin_, goal_;
};

inline std::unique_ptr<Environment> make_env(const std::string& name) {
  if (name == "cartpole") return std::make_unique<CartPole>();
  if (name == "pendulum") return std::make_unique<Pendulum>();
  if (name == "pointmass") return std::make_unique<PointMass>();
  throw InputError("unknown environment '" + name + "' (expected cartpole, pendulum or pointmass)");
}

// One episode. states[t] is the state in which actions[t] was taken.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  // True when the episode ended by termination rather than the horizon.
  bool terminated = false;

  std::size_t size() const { return states.size(); }
  bool operator==(const Trajectory& o) const {
    if (states.size() != o.states.size() || actions.size() != o.actions.size() || rewards != o.rewards ||
        terminated != o.terminated)
      return false;
    for (std::size_t i = 0; i < states.size(); ++i)
      if (!same_values(states[i], o.states[i])) return false;
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (!same_values(actions[i], o.actions[i])) return false;
    return true;
  }
};

inline double true_return(std::span<const double> rewards, double gamma) {
  double total = 0.0, discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

inline double true_return(const Trajectory& traj, double gamma) {
  if (traj.rewards.empty()) throw InputError("true_return of an empty trajectory");
  return true_return(std::span<const double>(traj.rewards), gamma);
}

/// Rolls one episode, capped at the environment horizon. `actor(obs)`
/// returns the action to store; the environment receives it clipped to the
/// action space.
template <typename Actor>
Trajectory rollout_episode(const Environment& env, Actor&& actor, Rng& rng) {
  Trajectory traj;
  const auto& spec = env.spec();
  Vector s = env.reset(rng);
  for (int t = 0; t < spec.horizon; ++t) {
    Vector a = actor(env.observe(s));
    StepResult r = env.step(s, spec.action_space.clip(a));
    traj.states.push_back(std::move(s));
    traj.actions.push_back(std::move(a));
    traj.rewards.push_back(r.reward);
    s = std::move(r.next_state);
    if (r.done) {
      traj.terminated = true;
      break;
    }
  }
  return traj;
}

}  // namespace agail

#endif  // AGAIL_ENVS_HPP_
