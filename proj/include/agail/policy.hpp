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

#ifndef AGAIL_POLICY_HPP_
#define AGAIL_POLICY_HPP_

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "agail/envs.hpp"
#include "agail/numcore.hpp"

namespace agail {

inline constexpr double kLogTwoPi = 1.8378770664093453;  // ln(2 pi)

// Column-wise log-softmax.
inline Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

/**
 * Stochastic policy with a shared tanh trunk, a policy head and a value head.
 *
 * Discrete action spaces get a categorical head (logits); Box spaces get a
 * diagonal Gaussian whose mean comes from the head and whose log-std is a
 * state-independent parameter vector.
 *
 * Two flat parameter views are exposed:
 *   policy params = [trunk, policy head, log_std]   (TRPO)
 *   value params  = [trunk, value head]             (regression)
 */
class StochasticPolicy {
 public:
  struct Pass {
    Mlp::Tape trunk;
    Mlp::Tape head;
    const Matrix& out() const { return head.result(); }
    const Matrix& features() const { return trunk.result(); }
  };

  StochasticPolicy() = default;

  StochasticPolicy(int obs_dim, ActionSpace space, Rng& rng, const std::vector<int>& hidden = {100, 100, 100},
                   double init_log_std = 0.0)
      : space_(std::move(space)) {
    if (obs_dim <= 0) throw InputError("policy needs a positive observation dimension");
    if (hidden.empty()) throw InputError("policy needs at least one hidden layer");
    std::vector<int> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    trunk_ = Mlp::make(sizes, Activation::Tanh, Activation::Tanh, rng);
    head_ = Mlp::make({hidden.back(), space_.n()}, Activation::Identity, Activation::Identity, rng, 0.01);
    value_head_ = Mlp::make({hidden.back(), 1}, Activation::Identity, Activation::Identity, rng);
    if (!space_.is_discrete()) log_std_ = Vector::Constant(space_.n(), init_log_std);
  }

  StochasticPolicy(ActionSpace space, Mlp trunk, Mlp head, Mlp value_head, Vector log_std)
      : space_(std::move(space)),
        trunk_(std::move(trunk)),
        head_(std::move(head)),
        value_head_(std::move(value_head)),
        log_std_(std::move(log_std)) {
    if (head_.input_dim() != trunk_.output_dim() || value_head_.input_dim() != trunk_.output_dim())
      throw InputError("policy heads do not match trunk width");
    if (head_.output_dim() != space_.n() || value_head_.output_dim() != 1)
      throw InputError("policy head output does not match action space");
    if (space_.is_discrete() != (log_std_.size() == 0) || (!space_.is_discrete() && log_std_.size() != space_.n()))
      throw InputError("log_std does not match action space");
    if (!log_std_.allFinite()) throw InputError("log_std must be finite");
  }

  const ActionSpace& action_space() const { return space_; }
  bool discrete() const { return space_.is_discrete(); }
  int obs_dim() const { return trunk_.input_dim(); }
  const Mlp& trunk() const { return trunk_; }
  const Mlp& head() const { return head_; }
  const Mlp& value_head() const { return value_head_; }
  const Vector& log_std() const { return log_std_; }

  Pass run(const Matrix& obs) const {
    Pass p;
    p.trunk = trunk_.record(obs);
    p.head = head_.record(p.trunk.result());
    return p;
  }

  // Logits (discrete) or means (continuous), one column per observation.
  Matrix distribution(const Matrix& obs) const { return head_.forward(trunk_.forward(obs)); }

  std::pair<Vector, double> act(const Vector& obs, Rng& rng) const {
    Matrix out = distribution(Matrix(obs));
    Vector a(space_.action_dim());
    if (discrete()) {
      Vector logp = log_softmax(out).col(0);
      Vector p = logp.array().exp();
      std::discrete_distribution<int> pick(p.data(), p.data() + p.size());
      const int k = pick(rng);
      a(0) = k;
      return {a, logp(k)};
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < a.size(); ++i) a(i) = out(i, 0) + std::exp(log_std_(i)) * normal(rng);
    return {a, gaussian_log_prob(out.col(0), a)};
  }

  // Most likely action.
  Vector mode(const Vector& obs) const {
    Matrix out = distribution(Matrix(obs));
    Vector a(space_.action_dim());
    if (discrete()) {
      Eigen::Index k;
      out.col(0).maxCoeff(&k);
      a(0) = static_cast<double>(k);
    } else {
      a = out.col(0);
    }
    return a;
  }

  double log_prob(const Vector& obs, const Vector& action) const {
    return log_prob(Matrix(obs), Matrix(action))(0);
  }

  Vector log_prob(const Matrix& obs, const Matrix& actions) const {
    return log_prob_from(distribution(obs), actions);
  }

  Vector log_prob_from(const Matrix& out, const Matrix& actions) const {
    if (actions.cols() != out.cols() || actions.rows() != space_.action_dim())
      throw InputError("actions do not match observation batch");
    Vector lp(out.cols());
    if (discrete()) {
      Matrix logp = log_softmax(out);
      for (Eigen::Index j = 0; j < out.cols(); ++j) lp(j) = logp(static_cast<int>(actions(0, j)), j);
    } else {
      for (Eigen::Index j = 0; j < out.cols(); ++j) lp(j) = gaussian_log_prob(out.col(j), actions.col(j));
    }
    return lp;
  }

  double entropy(const Vector& obs) const { return entropy_from(distribution(Matrix(obs)))(0); }

  Vector entropy_from(const Matrix& out) const {
    Vector h(out.cols());
    if (discrete()) {
      Matrix logp = log_softmax(out);
      for (Eigen::Index j = 0; j < out.cols(); ++j) h(j) = -(logp.col(j).array().exp() * logp.col(j).array()).sum();
    } else {
      h.setConstant(log_std_.sum() + 0.5 * space_.n() * (kLogTwoPi + 1.0));
    }
    return h;
  }

  Vector value(const Matrix& obs) const { return value_head_.forward(trunk_.forward(obs)).row(0).transpose(); }
  double value(const Vector& obs) const { return value(Matrix(obs))(0); }

  // --- flat parameter views ---

  int num_policy_params() const {
    return trunk_.num_params() + head_.num_params() + static_cast<int>(log_std_.size());
  }

  Vector policy_params() const {
    Vector p(num_policy_params());
    p << trunk_.params(), head_.params(), log_std_;
    return p;
  }

  void set_policy_params(const Vector& p) {
    if (p.size() != num_policy_params()) throw InputError("policy parameter size mismatch");
    const int nt = trunk_.num_params(), nh = head_.num_params();
    trunk_.set_params(p.head(nt));
    head_.set_params(p.segment(nt, nh));
    log_std_ = p.tail(log_std_.size());
  }

  int num_value_params() const { return trunk_.num_params() + value_head_.num_params(); }

  Vector value_params() const {
    Vector p(num_value_params());
    p << trunk_.params(), value_head_.params();
    return p;
  }

  void set_value_params(const Vector& p) {
    if (p.size() != num_value_params()) throw InputError("value parameter size mismatch");
    trunk_.set_params(p.head(trunk_.num_params()));
    value_head_.set_params(p.tail(value_head_.num_params()));
  }

  /// Pulls a gradient on the head output (and on log_std) back to the
  /// policy parameter layout.
  Vector policy_vjp(const Pass& pass, const Matrix& d_out, const Vector& d_log_std) const {
    auto gh = head_.backward(pass.head, d_out);
    auto gt = trunk_.backward(pass.trunk, gh.input);
    Vector g(num_policy_params());
    if (log_std_.size() > 0) {
      g << gt.params, gh.params, d_log_std;
    } else {
      g << gt.params, gh.params;
    }
    return g;
  }

  /// Directional derivative of the head output along a policy-parameter
  /// direction; the log_std part of the direction is returned separately.
  std::pair<Matrix, Vector> policy_jvp(const Pass& pass, const Vector& v) const {
    const int nt = trunk_.num_params(), nh = head_.num_params();
    Matrix d_feat = trunk_.jvp(pass.trunk, v.head(nt));
    Matrix d_out = head_.jvp(pass.head, v.segment(nt, nh), &d_feat);
    return {std::move(d_out), v.tail(log_std_.size())};
  }

  /// Gradient of sum_j weights(j) * log pi(a_j | s_j) w.r.t. policy params.
  Vector log_prob_grad(const Pass& pass, const Matrix& actions, const Vector& weights) const {
    const Matrix& out = pass.out();
    Matrix d_out(out.rows(), out.cols());
    Vector d_ls = Vector::Zero(log_std_.size());
    if (discrete()) {
      Matrix p = log_softmax(out).array().exp();
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        d_out.col(j) = -weights(j) * p.col(j);
        d_out(static_cast<int>(actions(0, j)), j) += weights(j);
      }
    } else {
      Vector inv_var = (-2.0 * log_std_).array().exp();
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        Vector diff = actions.col(j) - out.col(j);
        d_out.col(j) = weights(j) * diff.cwiseProduct(inv_var);
        d_ls.array() += weights(j) * (diff.array().square() * inv_var.array() - 1.0);
      }
    }
    return policy_vjp(pass, d_out, d_ls);
  }

  /// Gradient of sum_j weights(j) * H(pi(.|s_j)) w.r.t. policy params.
  Vector entropy_grad(const Pass& pass, const Vector& weights) const {
    const Matrix& out = pass.out();
    Matrix d_out = Matrix::Zero(out.rows(), out.cols());
    Vector d_ls = Vector::Zero(log_std_.size());
    if (discrete()) {
      Matrix logp = log_softmax(out);
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        Vector p = logp.col(j).array().exp();
        const double h = -(p.array() * logp.col(j).array()).sum();
        d_out.col(j) = -weights(j) * (p.array() * (logp.col(j).array() + h)).matrix();
      }
    } else {
      d_ls.setConstant(weights.sum());
    }
    return policy_vjp(pass, d_out, d_ls);
  }

  /// Gradient of sum_j upstream(j) * V(s_j) w.r.t. value params.
  Vector value_grad(const Matrix& obs, const Vector& upstream) const {
    auto tt = trunk_.record(obs);
    auto tv = value_head_.record(tt.result());
    auto gv = value_head_.backward(tv, upstream.transpose());
    auto gt = trunk_.backward(tt, gv.input);
    Vector g(num_value_params());
    g << gt.params, gv.params;
    return g;
  }

  // Value head alone, on top of fixed trunk features.
  Vector value_head_grad(const Matrix& features, const Vector& upstream) const {
    return value_head_.backward(value_head_.record(features), upstream.transpose()).params;
  }

  Vector value_from_features(const Matrix& features) const {
    return value_head_.forward(features).row(0).transpose();
  }

  void set_value_head_params(const Vector& p) { value_head_.set_params(p); }

  double gaussian_log_prob(const Vector& mean, const Vector& a) const {
    const Vector z = (a - mean).array() * (-log_std_).array().exp();
    return -0.5 * z.squaredNorm() - log_std_.sum() - 0.5 * mean.size() * kLogTwoPi;
  }

 private:
  ActionSpace space_;
  Mlp trunk_;
  Mlp head_;
  Mlp value_head_;
  Vector log_std_;
};

/// Per-sample KL(old || new) given both heads' outputs at the same states.
inline Vector kl_from(const StochasticPolicy& old_policy, const Matrix& old_out, const StochasticPolicy& new_policy,
                      const Matrix& new_out) {
  Vector kl(old_out.cols());
  if (old_policy.discrete()) {
    Matrix lo = log_softmax(old_out), ln = log_softmax(new_out);
    for (Eigen::Index j = 0; j < kl.size(); ++j)
      kl(j) = (lo.col(j).array().exp() * (lo.col(j) - ln.col(j)).array()).sum();
  } else {
    const Vector& so = old_policy.log_std();
    const Vector& sn = new_policy.log_std();
    Vector var_o = (2.0 * so).array().exp(), var_n = (2.0 * sn).array().exp();
    for (Eigen::Index j = 0; j < kl.size(); ++j) {
      Vector dm = old_out.col(j) - new_out.col(j);
      kl(j) = ((sn - so).array() + (var_o.array() + dm.array().square()) / (2.0 * var_n.array()) - 0.5).sum();
    }
  }
  return kl;
}

inline double kl(const StochasticPolicy& old_policy, const StochasticPolicy& new_policy, const Vector& obs) {
  Matrix o = obs;
  return kl_from(old_policy, old_policy.distribution(o), new_policy, new_policy.distribution(o))(0);
}

// ---------------------------------------------------------------------------
// Rollout batches and advantage estimation

struct EpisodeSpan {
  int start = 0;
  int length = 0;
  bool terminated = false;
  // Observation after the final step, used to bootstrap truncated episodes.
  Vector final_obs;
  double bootstrap_value = 0.0;
  double true_return = 0.0;
};

struct RolloutBatch {
  Matrix obs;      // obs_dim x N
  Matrix actions;  // action_dim x N
  Vector env_rewards;
  Vector rewards;  // what the learner optimizes (true or composed)
  Vector old_log_probs;
  Vector values;
  Vector advantages;
  Vector returns;
  std::vector<EpisodeSpan> episodes;

  int size() const { return static_cast<int>(obs.cols()); }
};

/// Generalized advantage estimation over every episode in the batch.
/// Terminated episodes bootstrap with 0, truncated ones with the stored
/// bootstrap_value.
inline void gae(RolloutBatch& batch, double gamma, double lambda) {
  const int n = batch.size();
  if (batch.rewards.size() != n || batch.values.size() != n) throw InputError("gae: rewards/values misaligned");
  batch.advantages.resize(n);
  for (const auto& ep : batch.episodes) {
    double next_value = ep.terminated ? 0.0 : ep.bootstrap_value;
    double running = 0.0;
    for (int t = ep.start + ep.length - 1; t >= ep.start; --t) {
      const double delta = batch.rewards(t) + gamma * next_value - batch.values(t);
      running = delta + gamma * lambda * running;
      batch.advantages(t) = running;
      next_value = batch.values(t);
    }
  }
  batch.returns = batch.advantages + batch.values;
}

// Shift to zero mean and scale to unit (population) std. A constant vector
// becomes all zeros.
inline void normalize_advantages(Vector& adv) {
  if (adv.size() == 0) return;
  const double mean = adv.mean();
  adv.array() -= mean;
  const double std = std::sqrt(adv.squaredNorm() / static_cast<double>(adv.size()));
  if (std < 1e-12) {
    adv.setZero();
    return;
  }
  adv /= std;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   AGAIL-POLICY v1 env=<name> algo=<algo>
//   action discrete <n>            | action box <dim>  (then low / high lines)
//   <trunk mlp> <head mlp> <value mlp>
//   log_std <values...>

struct PolicyCheckpoint {
  std::string env;
  std::string algo;
  StochasticPolicy policy;
};

inline void write_policy(std::ostream& out, const StochasticPolicy& policy, const std::string& env,
                         const std::string& algo) {
  out << "AGAIL-POLICY v1 env=" << env << " algo=" << algo << '\n';
  const auto& space = policy.action_space();
  if (space.is_discrete()) {
    out << "action discrete " << space.n() << '\n';
  } else {
    out << "action box " << space.n() << '\n';
    write_values(out, space.low().data(), space.low().size());
    write_values(out, space.high().data(), space.high().size());
  }
  write_mlp(out, policy.trunk());
  write_mlp(out, policy.head());
  write_mlp(out, policy.value_head());
  out << "log_std";
  for (Eigen::Index i = 0; i < policy.log_std().size(); ++i) out << ' ' << format_double(policy.log_std()(i));
  out << '\n';
}

inline PolicyCheckpoint read_policy(std::istream& in) {
  detail::LineReader reader{in};
  PolicyCheckpoint ck;
  auto header = reader.next("checkpoint header");
  auto tok = detail::split_ws(header);
  if (tok.size() != 4 || tok[0] != "AGAIL-POLICY" || tok[1] != "v1" || !tok[2].starts_with("env=") ||
      !tok[3].starts_with("algo="))
    throw ParseError("expected 'AGAIL-POLICY v1 env=<name> algo=<algo>'", reader.line_no, 0);
  ck.env = std::string(tok[2].substr(4));
  ck.algo = std::string(tok[3].substr(5));

  auto al = reader.next("action space");
  auto at = detail::split_ws(al);
  if (at.size() != 3 || at[0] != "action") throw ParseError("expected 'action <kind> <n>'", reader.line_no, 0);
  const std::size_t n = detail::parse_count(at[2], reader.line_no);
  ActionSpace space;
  if (at[1] == "discrete") {
    space = ActionSpace::discrete(static_cast<int>(n));
  } else if (at[1] == "box") {
    const std::string lo_line = reader.next("box low");
    auto lo = detail::parse_values(lo_line, n, reader.line_no);
    const std::string hi_line = reader.next("box high");
    auto hi = detail::parse_values(hi_line, n, reader.line_no);
    space = ActionSpace::box(Eigen::Map<Vector>(lo.data(), lo.size()), Eigen::Map<Vector>(hi.data(), hi.size()));
  } else {
    throw ParseError("unknown action kind '" + std::string(at[1]) + "'", reader.line_no, 0);
  }
  Mlp trunk = read_mlp(reader);
  Mlp head = read_mlp(reader);
  Mlp value = read_mlp(reader);
  auto ll = reader.next("log_std");
  auto lt = detail::split_ws(ll);
  if (lt.empty() || lt[0] != "log_std") throw ParseError("expected 'log_std'", reader.line_no, 0);
  Vector log_std(static_cast<Eigen::Index>(lt.size() - 1));
  for (std::size_t i = 1; i < lt.size(); ++i)
    if (!parse_double(lt[i], log_std(static_cast<Eigen::Index>(i - 1))))
      throw ParseError("malformed log_std value", reader.line_no, static_cast<std::size_t>(lt[i].data() - ll.data()));
  try {
    ck.policy = StochasticPolicy(space, std::move(trunk), std::move(head), std::move(value), std::move(log_std));
  } catch (const InputError& e) {
    throw ParseError(e.what(), reader.line_no, 0);
  }
  return ck;
}

}  // namespace agail

#endif  // AGAIL_POLICY_HPP_
