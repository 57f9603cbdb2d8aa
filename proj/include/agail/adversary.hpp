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

#ifndef AGAIL_ADVERSARY_HPP_
#define AGAIL_ADVERSARY_HPP_

#include <cmath>
#include <optional>
#include <vector>

#include "agail/numcore.hpp"

namespace agail {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

enum class DiscriminatorMode { StateOnly, StateAction };

// How a discriminator output becomes a per-step reward.
enum class RewardForm {
  Probability,         // r = D(s)
  NegLogOneMinusProb,  // r = -log(1 - D(s))
};

struct DiscriminatorReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
};

/**
 * Binary classifier over states (or state-action pairs) whose output is
 * the probability that the input came from the expert.
 *
 * Inputs are passed already assembled: observations for StateOnly,
 * observations stacked on top of encoded actions for StateAction.
 */
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(DiscriminatorMode mode, int obs_dim, int action_dim, Rng& rng,
                const std::vector<int>& hidden = {100, 100, 100}, double learning_rate = 3e-4)
      : mode_(mode), obs_dim_(obs_dim), action_dim_(mode == DiscriminatorMode::StateOnly ? 0 : action_dim) {
    std::vector<int> sizes{input_dim()};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    net_ = Mlp::make(sizes, Activation::Tanh, Activation::Identity, rng);
    opt_ = AdamState(net_.num_params(), learning_rate);
  }

  Discriminator(DiscriminatorMode mode, int obs_dim, int action_dim, Mlp net, double learning_rate = 3e-4)
      : mode_(mode),
        obs_dim_(obs_dim),
        action_dim_(mode == DiscriminatorMode::StateOnly ? 0 : action_dim),
        net_(std::move(net)) {
    if (net_.input_dim() != input_dim() || net_.output_dim() != 1)
      throw InputError("discriminator network shape does not match its mode");
    opt_ = AdamState(net_.num_params(), learning_rate);
  }

  DiscriminatorMode mode() const { return mode_; }
  int input_dim() const { return obs_dim_ + action_dim_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  AdamState& optimizer() { return opt_; }

  Vector logits(const Matrix& inputs) const {
    check(inputs);
    return net_.forward(inputs).row(0).transpose();
  }

  Vector expert_prob(const Matrix& inputs) const {
    Vector z = logits(inputs);
    return z.unaryExpr([](double v) { return logistic(v); });
  }

  double expert_prob(const Vector& input) const { return expert_prob(Matrix(input))(0); }

  Vector reward(const Matrix& inputs, RewardForm form) const {
    Vector z = logits(inputs);
    if (form == RewardForm::Probability) return z.unaryExpr([](double v) { return logistic(v); });
    // -log(1 - sigmoid(z)) = softplus(z)
    return z.unaryExpr([](double v) { return softplus(v); });
  }

  /// Mean binary cross-entropy, expert labelled 1 and policy 0, over the
  /// union of both batches.
  double loss(const Matrix& policy_inputs, const Matrix& expert_inputs) const {
    Vector zp = logits(policy_inputs), ze = logits(expert_inputs);
    double s = 0.0;
    for (Eigen::Index j = 0; j < zp.size(); ++j) s += softplus(zp(j));
    for (Eigen::Index j = 0; j < ze.size(); ++j) s += softplus(-ze(j));
    return s / static_cast<double>(zp.size() + ze.size());
  }

  Vector loss_gradient(const Matrix& policy_inputs, const Matrix& expert_inputs) const {
    check(policy_inputs);
    check(expert_inputs);
    const double n = static_cast<double>(policy_inputs.cols() + expert_inputs.cols());
    auto tp = net_.record(policy_inputs);
    auto te = net_.record(expert_inputs);
    Matrix gp = tp.result().unaryExpr([n](double z) { return logistic(z) / n; });
    Matrix ge = te.result().unaryExpr([n](double z) { return (logistic(z) - 1.0) / n; });
    return net_.backward(tp, gp).params + net_.backward(te, ge).params;
  }

 private:
  void check(const Matrix& inputs) const {
    if (inputs.rows() != input_dim())
      throw InputError("discriminator expects inputs of dimension " + std::to_string(input_dim()) + ", got " +
                       std::to_string(inputs.rows()));
  }

  DiscriminatorMode mode_ = DiscriminatorMode::StateOnly;
  int obs_dim_ = 0;
  int action_dim_ = 0;
  Mlp net_;
  AdamState opt_;
};

/// One Adam step on the classification loss.
inline DiscriminatorReport d_update(Discriminator& d, const Matrix& policy_inputs, const Matrix& expert_inputs) {
  if (policy_inputs.cols() == 0 || expert_inputs.cols() == 0) throw InputError("d_update: empty batch");
  if (policy_inputs.cols() != expert_inputs.cols()) throw InputError("d_update: batches must have the same size");
  DiscriminatorReport report;
  report.loss_before = d.loss(policy_inputs, expert_inputs);
  Vector grad = d.loss_gradient(policy_inputs, expert_inputs);
  Vector params = d.net().params();
  adam_step(params, grad, d.optimizer());
  d.net().set_params(params);
  report.loss_after = d.loss(policy_inputs, expert_inputs);
  if (!std::isfinite(report.loss_after)) throw TrainingError("d_update: non-finite loss");
  return report;
}

/// Optimal discriminator for tabular visitation distributions,
/// D*(s) = nu_E(s) / (nu_E(s) + nu_pi(s)). States with no mass under either
/// table have no optimum and are reported as nullopt.
inline std::vector<std::optional<double>> bayes_optimal_check(const std::vector<double>& nu_pi,
                                                              const std::vector<double>& nu_expert) {
  if (nu_pi.size() != nu_expert.size()) throw InputError("visitation tables differ in size");
  std::vector<std::optional<double>> out(nu_pi.size());
  for (std::size_t s = 0; s < nu_pi.size(); ++s) {
    if (nu_pi[s] < 0 || nu_expert[s] < 0) throw InputError("visitation mass must be non-negative");
    const double total = nu_pi[s] + nu_expert[s];
    if (total > 0) out[s] = nu_expert[s] / total;
  }
  return out;
}

}  // namespace agail

#endif  // AGAIL_ADVERSARY_HPP_
