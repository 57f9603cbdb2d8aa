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

#ifndef AGAIL_GUIDE_HPP_
#define AGAIL_GUIDE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "agail/envs.hpp"
#include "agail/numcore.hpp"
#include "agail/policy.hpp"

namespace agail {

struct GuideReport {
  bool skipped = false;
  double nll_before = 0.0;
  double nll_after = 0.0;
};

/**
 * Posterior network Q(a_E | a, s): given a state and the action the policy
 * takes there, predicts the demonstrated action. Categorical over expert
 * actions for discrete spaces; diagonal Gaussian (mean, log-std per
 * dimension) for continuous ones.
 *
 * Batches are column-per-sample: obs (obs_dim x N), policy actions and
 * expert actions (action_dim x N, raw action vectors, not encoded).
 */
class Guide {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  Guide() = default;

  Guide(int obs_dim, ActionSpace space, Rng& rng, const std::vector<int>& hidden = {100, 100, 100},
        double learning_rate = 3e-4)
      : space_(std::move(space)), obs_dim_(obs_dim) {
    std::vector<int> sizes{obs_dim + space_.encoded_dim()};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(output_dim());
    net_ = Mlp::make(sizes, Activation::Tanh, Activation::Identity, rng);
    opt_ = AdamState(net_.num_params(), learning_rate);
  }

  Guide(int obs_dim, ActionSpace space, Mlp net, double learning_rate = 3e-4)
      : space_(std::move(space)), obs_dim_(obs_dim), net_(std::move(net)) {
    if (net_.input_dim() != obs_dim_ + space_.encoded_dim() || net_.output_dim() != output_dim())
      throw InputError("guide network shape does not match the action space");
    opt_ = AdamState(net_.num_params(), learning_rate);
  }

  const ActionSpace& action_space() const { return space_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  AdamState& optimizer() { return opt_; }

  Matrix inputs(const Matrix& obs, const Matrix& policy_actions) const {
    if (obs.rows() != obs_dim_ || policy_actions.cols() != obs.cols() ||
        policy_actions.rows() != space_.action_dim())
      throw InputError("guide: observation/action batch shape mismatch");
    Matrix x(obs_dim_ + space_.encoded_dim(), obs.cols());
    x << obs, space_.encode(policy_actions);
    return x;
  }

  /// log Q(a_E | a, s) per sample.
  Vector log_q(const Matrix& obs, const Matrix& policy_actions, const Matrix& expert_actions) const {
    return log_q_from(net_.forward(inputs(obs, policy_actions)), expert_actions);
  }

  double nll(const Matrix& obs, const Matrix& policy_actions, const Matrix& expert_actions) const {
    return -log_q(obs, policy_actions, expert_actions).mean();
  }

  Vector nll_gradient(const Matrix& obs, const Matrix& policy_actions, const Matrix& expert_actions) const {
    auto tape = net_.record(inputs(obs, policy_actions));
    const Matrix& out = tape.result();
    check_expert(expert_actions, out.cols());
    const double n = static_cast<double>(out.cols());
    Matrix up(out.rows(), out.cols());
    if (space_.is_discrete()) {
      Matrix p = log_softmax(out).array().exp();
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        up.col(j) = p.col(j) / n;
        up(static_cast<int>(expert_actions(0, j)), j) -= 1.0 / n;
      }
    } else {
      const int d = space_.n();
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (int i = 0; i < d; ++i) {
          const double raw = out(d + i, j);
          const double ls = std::clamp(raw, kMinLogStd, kMaxLogStd);
          const double z = (expert_actions(i, j) - out(i, j)) * std::exp(-ls);
          up(i, j) = -z * std::exp(-ls) / n;
          const bool inside = raw > kMinLogStd && raw < kMaxLogStd;
          up(d + i, j) = inside ? (1.0 - z * z) / n : 0.0;
        }
      }
    }
    return net_.backward(tape, up).params;
  }

  /// Bounded reward in (0, 1]: posterior mass of a_E (discrete), or the
  /// density at a_E relative to the density at the posterior mode
  /// (continuous). Values that would underflow are held at the smallest
  /// normal double.
  Vector reward(const Matrix& obs, const Matrix& policy_actions, const Matrix& expert_actions) const {
    constexpr double kFloor = std::numeric_limits<double>::min();
    Matrix out = net_.forward(inputs(obs, policy_actions));
    check_expert(expert_actions, out.cols());
    if (space_.is_discrete()) return log_q_from(out, expert_actions).array().exp().max(kFloor);
    const int d = space_.n();
    Vector r(out.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      double sq = 0.0;
      for (int i = 0; i < d; ++i) {
        const double ls = std::clamp(out(d + i, j), kMinLogStd, kMaxLogStd);
        const double z = (expert_actions(i, j) - out(i, j)) * std::exp(-ls);
        sq += z * z;
      }
      r(j) = std::max(std::exp(-0.5 * sq), kFloor);
    }
    return r;
  }

  double reward(const Vector& expert_action, const Vector& policy_action, const Vector& obs) const {
    return reward(Matrix(obs), Matrix(policy_action), Matrix(expert_action))(0);
  }

 private:
  int output_dim() const { return space_.is_discrete() ? space_.n() : 2 * space_.n(); }

  void check_expert(const Matrix& expert_actions, Eigen::Index n) const {
    if (expert_actions.cols() != n || expert_actions.rows() != space_.action_dim())
      throw InputError("guide: expert action batch shape mismatch");
  }

  Vector log_q_from(const Matrix& out, const Matrix& expert_actions) const {
    check_expert(expert_actions, out.cols());
    Vector lq(out.cols());
    if (space_.is_discrete()) {
      Matrix logp = log_softmax(out);
      for (Eigen::Index j = 0; j < out.cols(); ++j) lq(j) = logp(static_cast<int>(expert_actions(0, j)), j);
      return lq;
    }
    const int d = space_.n();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const double ls = std::clamp(out(d + i, j), kMinLogStd, kMaxLogStd);
        const double z = (expert_actions(i, j) - out(i, j)) * std::exp(-ls);
        s += -0.5 * z * z - ls - 0.5 * kLogTwoPi;
      }
      lq(j) = s;
    }
    return lq;
  }

  ActionSpace space_;
  int obs_dim_ = 0;
  Mlp net_;
  AdamState opt_;
};

/// One Adam step on -mean log Q(a_E | a, s). An empty batch leaves the
/// guide untouched.
inline GuideReport q_update(Guide& guide, const Matrix& obs, const Matrix& expert_actions,
                            const Matrix& policy_actions) {
  GuideReport report;
  if (obs.cols() == 0) {
    report.skipped = true;
    return report;
  }
  report.nll_before = guide.nll(obs, policy_actions, expert_actions);
  Vector grad = guide.nll_gradient(obs, policy_actions, expert_actions);
  Vector params = guide.net().params();
  adam_step(params, grad, guide.optimizer());
  guide.net().set_params(params);
  report.nll_after = guide.nll(obs, policy_actions, expert_actions);
  if (!std::isfinite(report.nll_after)) throw TrainingError("q_update: non-finite loss");
  return report;
}

/// Plug-in entropy of the demonstrated-action marginal: empirical
/// frequencies for discrete actions, a fitted diagonal Gaussian otherwise.
inline double action_marginal_entropy(const ActionSpace& space, const Matrix& expert_actions) {
  const Eigen::Index n = expert_actions.cols();
  if (n == 0) return 0.0;
  if (space.is_discrete()) {
    std::map<int, int> counts;
    for (Eigen::Index j = 0; j < n; ++j) ++counts[static_cast<int>(expert_actions(0, j))];
    double h = 0.0;
    for (auto [k, c] : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(n);
      h -= p * std::log(p);
    }
    return h;
  }
  double h = 0.0;
  for (Eigen::Index i = 0; i < expert_actions.rows(); ++i) {
    const double mean = expert_actions.row(i).mean();
    const double var = (expert_actions.row(i).array() - mean).square().mean();
    h += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std::max(var, 1e-12));
  }
  return h;
}

/// E[log Q(a_E | a, s_E)] + H(a_E) over a batch of demonstrated pairs.
inline double lower_bound_estimate(const Guide& guide, const Matrix& obs, const Matrix& expert_actions,
                                   const Matrix& policy_actions) {
  if (obs.cols() == 0) throw InputError("lower_bound_estimate: empty batch");
  return guide.log_q(obs, policy_actions, expert_actions).mean() +
         action_marginal_entropy(guide.action_space(), expert_actions);
}

}  // namespace agail

#endif  // AGAIL_GUIDE_HPP_
