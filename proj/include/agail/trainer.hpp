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

#ifndef AGAIL_TRAINER_HPP_
#define AGAIL_TRAINER_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "agail/adversary.hpp"
#include "agail/demos.hpp"
#include "agail/envs.hpp"
#include "agail/guide.hpp"
#include "agail/numcore.hpp"
#include "agail/policy.hpp"
#include "agail/trpo.hpp"

namespace agail {

enum class Algorithm { AGAIL, GAIL, StateGAIL, TRPO, BC };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::AGAIL: return "agail";
    case Algorithm::GAIL: return "gail";
    case Algorithm::StateGAIL: return "state_gail";
    case Algorithm::TRPO: return "trpo";
    case Algorithm::BC: return "bc";
  }
  return "agail";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "agail") return Algorithm::AGAIL;
  if (s == "gail") return Algorithm::GAIL;
  if (s == "state_gail" || s == "stategail" || s == "state-gail") return Algorithm::StateGAIL;
  if (s == "trpo") return Algorithm::TRPO;
  if (s == "bc") return Algorithm::BC;
  throw InputError("unknown algorithm '" + s + "' (expected agail, gail, state_gail, trpo or bc)");
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::AGAIL;
  std::string env = "cartpole";
  double eta = 0.0;
  double alpha = 1.0;
  // Guide coefficient; 1 - eta when unset.
  std::optional<double> beta;
  // Entropy bonus weight in the policy surrogate.
  double lambda1 = 0.0;
  // Multiplies beta on the guide reward.
  double lambda2 = 1.0;
  // Discount for advantage estimation; environment default when unset.
  std::optional<double> gamma;
  double gae_lambda = 0.97;
  // Timesteps collected per iteration; 4000 (8000 for pendulum) when unset.
  std::optional<int> batch_timesteps;
  int iterations = 300;
  std::uint64_t seed = 0;
  std::string demo_path;
  TrpoConfig trpo;
  std::vector<int> hidden = {100, 100, 100};

  double value_lr = 1e-2;
  int value_epochs = 20;
  int value_minibatch = 256;
  // Let the value regression move the shared trunk as well.
  bool value_updates_trunk = false;

  double d_lr = 3e-4;
  int d_steps = 5;
  int d_batch = 512;
  RewardForm reward_form = RewardForm::Probability;

  double q_lr = 3e-4;
  int q_steps = 5;
  int q_batch = 512;

  double bc_lr = 1e-3;
  int bc_batch = 64;
  int eval_episodes = 10;

  // Record wall-clock seconds in the metrics; off keeps runs byte-identical.
  bool timing = false;
  int checkpoint_every = 0;

  double resolved_beta() const { return beta.value_or(1.0 - eta); }
  double guide_weight() const { return resolved_beta() * lambda2; }
  int resolved_batch(const EnvSpec& spec) const {
    return batch_timesteps.value_or(spec.name == "pendulum" ? 8000 : 4000);
  }
  double resolved_gamma(const EnvSpec& spec) const { return gamma.value_or(spec.gamma); }

  void validate() const {
    if (!(eta >= 0 && eta <= 1)) throw ConfigError("eta must lie in [0, 1]");
    if (!(alpha >= 0) || !(resolved_beta() >= 0)) throw ConfigError("alpha and beta must be non-negative");
    if (!(lambda1 >= 0) || !(lambda2 >= 0)) throw ConfigError("lambda1 and lambda2 must be non-negative");
    if (gamma && !(*gamma > 0 && *gamma <= 1)) throw ConfigError("gamma must lie in (0, 1]");
    if (!(gae_lambda >= 0 && gae_lambda <= 1)) throw ConfigError("gae_lambda must lie in [0, 1]");
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (batch_timesteps && *batch_timesteps <= 0) throw ConfigError("batch_timesteps must be positive");
    if (value_epochs < 0 || value_minibatch <= 0 || d_steps < 0 || d_batch <= 0 || q_steps < 0 || q_batch <= 0 ||
        bc_batch <= 0 || eval_episodes <= 0 || checkpoint_every < 0)
      throw ConfigError("step counts and batch sizes must be positive");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
    trpo.validate();
  }
};

struct IterationMetrics {
  int iter = 0;
  double true_return = 0.0;
  double composed_reward = std::numeric_limits<double>::quiet_NaN();
  double d_bce = std::numeric_limits<double>::quiet_NaN();
  double q_nll = std::numeric_limits<double>::quiet_NaN();
  double kl = 0.0;
  double entropy = 0.0;
  double seconds = 0.0;
};

// Thrown when training produces non-finite values; the hook for a
// diagnostic checkpoint has already run.
class DivergenceError : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

struct TrainHooks {
  // Called after every iteration with its metrics row.
  std::function<void(const IterationMetrics&, const StochasticPolicy&)> on_iteration;
  std::function<void(const StochasticPolicy&)> on_divergence;
};

struct TrainResult {
  std::vector<IterationMetrics> metrics;
  StochasticPolicy policy;
  std::vector<TrpoReport> trpo_reports;
  // Per-epoch behaviour-cloning loss (bc only).
  std::vector<double> bc_loss;
};

// Independent random streams, so that skipping one consumer (e.g. the
// guide when it has no data) never shifts another.
namespace stream {
inline constexpr std::uint64_t kPolicyInit = 1;
inline constexpr std::uint64_t kDiscInit = 2;
inline constexpr std::uint64_t kGuideInit = 3;
inline constexpr std::uint64_t kRollout = 10;
inline constexpr std::uint64_t kDiscSample = 11;
inline constexpr std::uint64_t kGuideSample = 12;
inline constexpr std::uint64_t kRewardPairs = 13;
inline constexpr std::uint64_t kValueShuffle = 14;
inline constexpr std::uint64_t kEval = 15;
inline constexpr std::uint64_t kBc = 16;
}  // namespace stream

inline Matrix stack_columns(const std::vector<Vector>& cols, int rows) {
  Matrix m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
  return m;
}

inline Matrix observe_all(const Environment& env, const std::vector<Vector>& states) {
  Matrix m(env.spec().obs_dim, static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = env.observe(states[j]);
  return m;
}

/// Runs whole episodes with stochastic actions until at least `min_steps`
/// transitions are collected. Values and bootstrap values are filled in.
inline RolloutBatch collect_rollouts(const StochasticPolicy& policy, const Environment& env, int min_steps, Rng& rng) {
  const auto& spec = env.spec();
  std::vector<Vector> obs, actions;
  std::vector<double> rewards, logps;
  RolloutBatch batch;
  while (static_cast<int>(obs.size()) < min_steps) {
    EpisodeSpan ep;
    ep.start = static_cast<int>(obs.size());
    Vector s = env.reset(rng);
    for (int t = 0; t < spec.horizon; ++t) {
      Vector o = env.observe(s);
      auto [a, lp] = policy.act(o, rng);
      StepResult r = env.step(s, spec.action_space.clip(a));
      obs.push_back(std::move(o));
      actions.push_back(std::move(a));
      rewards.push_back(r.reward);
      logps.push_back(lp);
      ep.true_return += r.reward;
      s = std::move(r.next_state);
      if (r.done) {
        ep.terminated = true;
        break;
      }
    }
    ep.length = static_cast<int>(obs.size()) - ep.start;
    ep.final_obs = env.observe(s);
    batch.episodes.push_back(std::move(ep));
  }
  batch.obs = stack_columns(obs, spec.obs_dim);
  batch.actions = stack_columns(actions, spec.action_space.action_dim());
  batch.env_rewards = Eigen::Map<Vector>(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
  batch.rewards = batch.env_rewards;
  batch.old_log_probs = Eigen::Map<Vector>(logps.data(), static_cast<Eigen::Index>(logps.size()));
  batch.values = policy.value(batch.obs);
  Matrix finals(spec.obs_dim, static_cast<Eigen::Index>(batch.episodes.size()));
  for (std::size_t i = 0; i < batch.episodes.size(); ++i) finals.col(static_cast<Eigen::Index>(i)) = batch.episodes[i].final_obs;
  Vector boot = policy.value(finals);
  for (std::size_t i = 0; i < batch.episodes.size(); ++i) batch.episodes[i].bootstrap_value = boot(static_cast<Eigen::Index>(i));
  return batch;
}

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

// Sample standard deviation; zero for fewer than two values.
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Undiscounted episode returns. `greedy` takes the most likely action
/// instead of sampling.
inline EvalResult evaluate(const StochasticPolicy& policy, const Environment& env, int n_episodes, std::uint64_t seed,
                           bool greedy = false) {
  if (n_episodes <= 0) throw InputError("evaluate: n_episodes must be positive");
  EvalResult res;
  for (int i = 0; i < n_episodes; ++i) {
    Rng rng = make_rng(seed, {stream::kEval, static_cast<std::uint64_t>(i)});
    auto traj = rollout_episode(
        env, [&](const Vector& o) { return greedy ? policy.mode(o) : policy.act(o, rng).first; }, rng);
    res.returns.push_back(true_return(traj, 1.0));
  }
  res.mean = std::accumulate(res.returns.begin(), res.returns.end(), 0.0) / n_episodes;
  res.std = sample_std(res.returns);
  return res;
}

/// r = alpha * D(s) + beta * Q(a_E | s, a). The guide is not consulted when
/// beta is zero.
inline double compose_reward(const Vector& obs, const Vector& action, const Vector* sampled_expert_action,
                             const Discriminator& d, const Guide* q, double alpha, double beta) {
  if (d.mode() != DiscriminatorMode::StateOnly) throw InputError("compose_reward needs a state-only discriminator");
  double r = alpha * d.expert_prob(obs);
  if (beta > 0) {
    if (!q || !sampled_expert_action) throw ConfigError("compose_reward: beta > 0 needs a guide and an expert action");
    r += beta * q->reward(*sampled_expert_action, action, obs);
  }
  return r;
}

namespace detail {

inline void check_demos(const TrainConfig& cfg, const Environment& env, const IncompleteDemoSet& demos) {
  if (!demos.env.empty() && demos.env != env.spec().name)
    throw ConfigError("demo set was recorded on '" + demos.env + "', config trains on '" + env.spec().name + "'");
  if (demos.num_states() == 0) throw ConfigError("demo set is empty");
  for (const auto& t : demos.trajectories) {
    for (const auto& s : t.states)
      if (s.size() != env.spec().state_dim) throw ConfigError("demo states do not match the environment");
    for (const auto& a : t.actions)
      if (a && !env.spec().action_space.contains(env.spec().action_space.clip(*a)))
        throw ConfigError("demo actions do not match the environment");
  }
  (void)cfg;
}

// Fixed number of Adam epochs regressing V onto the batch returns. Unless
// value_updates_trunk is set, only the value head moves and the shared
// trunk stays under the trust-region step.
inline void fit_value(StochasticPolicy& policy, AdamState& opt, const RolloutBatch& batch, const TrainConfig& cfg,
                      Rng& rng) {
  const int n = batch.size();
  if (n == 0) return;
  const Matrix features = cfg.value_updates_trunk ? Matrix() : policy.trunk().forward(batch.obs);
  const Matrix& source = cfg.value_updates_trunk ? batch.obs : features;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < cfg.value_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += cfg.value_minibatch) {
      const int m = std::min(cfg.value_minibatch, n - start);
      Matrix x(source.rows(), m);
      Vector target(m);
      for (int k = 0; k < m; ++k) {
        x.col(k) = source.col(order[start + k]);
        target(k) = batch.returns(order[start + k]);
      }
      if (cfg.value_updates_trunk) {
        Vector residual = (policy.value(x) - target) / static_cast<double>(m);
        Vector p = policy.value_params();
        adam_step(p, policy.value_grad(x, residual), opt);
        policy.set_value_params(p);
      } else {
        Vector residual = (policy.value_from_features(x) - target) / static_cast<double>(m);
        Vector p = policy.value_head().params();
        adam_step(p, policy.value_head_grad(x, residual), opt);
        policy.set_value_head_params(p);
      }
    }
  }
}

inline bool finite_metrics(const IterationMetrics& m) {
  auto ok = [](double v) { return std::isfinite(v) || std::isnan(v); };
  return std::isfinite(m.true_return) && std::isfinite(m.kl) && std::isfinite(m.entropy) && ok(m.composed_reward) &&
         ok(m.d_bce) && ok(m.q_nll);
}

}  // namespace detail

/**
 * Adversarial / reinforcement training loop shared by AGAIL, GAIL,
 * state-only GAIL and TRPO on true rewards. Each iteration:
 *   1. roll out the policy for the timestep budget;
 *   2. update the discriminator on equal-size policy/expert batches;
 *   3. update the guide on demonstrated (s_E, a_E) pairs with a ~ pi(s_E),
 *      skipped when no action survived masking;
 *   4. relabel rewards, estimate advantages and take one TRPO step,
 *      then refit the value head.
 */
inline TrainResult train_adversarial(const TrainConfig& cfg, const IncompleteDemoSet* demos, const TrainHooks& hooks = {}) {
  cfg.validate();
  auto env_ptr = make_env(cfg.env);
  const Environment& env = *env_ptr;
  const auto& spec = env.spec();
  const Algorithm algo = cfg.algorithm;
  const bool imitation = algo != Algorithm::TRPO;
  const bool state_only = algo == Algorithm::AGAIL || algo == Algorithm::StateGAIL;
  const double guide_weight = algo == Algorithm::AGAIL ? cfg.guide_weight() : 0.0;

  ExpertPairs expert_pool;
  Matrix expert_pool_actions;
  if (imitation) {
    if (!demos) throw ConfigError(to_string(algo) + " needs a demonstration set");
    detail::check_demos(cfg, env, *demos);
    expert_pool = demonstrated_pairs(*demos);
    if (algo == Algorithm::GAIL && expert_pool.states.size() != demos->num_states())
      throw ConfigError("gail needs complete demonstrations (eta = 0); this set has masked actions");
    if (guide_weight > 0 && expert_pool.empty())
      throw ConfigError("beta > 0 but the demonstration set has no surviving actions");
    expert_pool_actions = stack_columns(expert_pool.actions, spec.action_space.action_dim());
  }

  const int obs_dim = spec.obs_dim;
  const int enc_dim = spec.action_space.encoded_dim();
  Rng init_rng = make_rng(cfg.seed, {stream::kPolicyInit});
  TrainResult result;
  result.policy = StochasticPolicy(obs_dim, spec.action_space, init_rng, cfg.hidden);
  StochasticPolicy& policy = result.policy;
  AdamState value_opt(cfg.value_updates_trunk ? policy.num_value_params() : policy.value_head().num_params(),
                      cfg.value_lr);

  std::optional<Discriminator> disc;
  std::optional<Guide> guide;
  if (imitation) {
    Rng drng = make_rng(cfg.seed, {stream::kDiscInit});
    disc.emplace(state_only ? DiscriminatorMode::StateOnly : DiscriminatorMode::StateAction, obs_dim, enc_dim, drng,
                 cfg.hidden, cfg.d_lr);
  }
  if (guide_weight > 0) {
    Rng grng = make_rng(cfg.seed, {stream::kGuideInit});
    guide.emplace(obs_dim, spec.action_space, grng, cfg.hidden, cfg.q_lr);
  }

  const double gamma = cfg.resolved_gamma(spec);
  const int budget = cfg.resolved_batch(spec);
  Rng value_rng = make_rng(cfg.seed, {stream::kValueShuffle});

  auto diverged = [&](const std::string& why) -> DivergenceError {
    if (hooks.on_divergence) hooks.on_divergence(policy);
    return DivergenceError(why);
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto iter_tag = static_cast<std::uint64_t>(it);
    IterationMetrics m;
    m.iter = it;
    try {
      Rng roll_rng = make_rng(cfg.seed, {stream::kRollout, iter_tag});
      RolloutBatch batch = collect_rollouts(policy, env, budget, roll_rng);
      double ret = 0.0;
      for (const auto& ep : batch.episodes) ret += ep.true_return;
      m.true_return = ret / static_cast<double>(batch.episodes.size());
      m.entropy = policy.entropy_from(policy.distribution(batch.obs)).mean();

      if (imitation) {
        const int n = batch.size();
        auto policy_inputs = [&](const Matrix& obs, const Matrix& acts) {
          if (state_only) return obs;
          Matrix x(obs_dim + enc_dim, obs.cols());
          x << obs, spec.action_space.encode(acts);
          return x;
        };

        // Discriminator.
        Rng d_rng = make_rng(cfg.seed, {stream::kDiscSample, iter_tag});
        double d_loss = 0.0;
        std::uniform_int_distribution<int> pick_policy(0, n - 1);
        for (int k = 0; k < cfg.d_steps; ++k) {
          Matrix pobs(obs_dim, cfg.d_batch), pacts(spec.action_space.action_dim(), cfg.d_batch);
          for (int j = 0; j < cfg.d_batch; ++j) {
            const int idx = pick_policy(d_rng);
            pobs.col(j) = batch.obs.col(idx);
            pacts.col(j) = batch.actions.col(idx);
          }
          Matrix eobs, eacts;
          if (state_only) {
            eobs = observe_all(env, sample_expert_states(*demos, cfg.d_batch, d_rng));
            eacts.resize(spec.action_space.action_dim(), cfg.d_batch);
          } else {
            auto pairs = sample_expert_action_pairs(*demos, cfg.d_batch, d_rng);
            eobs = observe_all(env, pairs.states);
            eacts = stack_columns(pairs.actions, spec.action_space.action_dim());
          }
          auto rep = d_update(*disc, policy_inputs(pobs, pacts), policy_inputs(eobs, eacts));
          d_loss += rep.loss_before;
        }
        if (cfg.d_steps > 0) m.d_bce = d_loss / cfg.d_steps;

        // Guide.
        if (guide) {
          Rng q_rng = make_rng(cfg.seed, {stream::kGuideSample, iter_tag});
          double q_loss = 0.0;
          int q_done = 0;
          for (int k = 0; k < cfg.q_steps; ++k) {
            auto pairs = sample_expert_action_pairs(*demos, cfg.q_batch, q_rng);
            if (pairs.empty()) break;
            Matrix eobs = observe_all(env, pairs.states);
            Matrix eacts = stack_columns(pairs.actions, spec.action_space.action_dim());
            Matrix pacts(spec.action_space.action_dim(), eobs.cols());
            for (Eigen::Index j = 0; j < eobs.cols(); ++j) pacts.col(j) = policy.act(eobs.col(j), q_rng).first;
            auto rep = q_update(*guide, eobs, eacts, pacts);
            q_loss += rep.nll_before;
            ++q_done;
          }
          if (q_done > 0) m.q_nll = q_loss / q_done;
        }

        // Reward relabelling.
        batch.rewards = cfg.alpha * disc->reward(policy_inputs(batch.obs, batch.actions), cfg.reward_form);
        if (guide) {
          Rng r_rng = make_rng(cfg.seed, {stream::kRewardPairs, iter_tag});
          std::uniform_int_distribution<Eigen::Index> pick(0, expert_pool_actions.cols() - 1);
          Matrix sampled(expert_pool_actions.rows(), n);
          for (int j = 0; j < n; ++j) sampled.col(j) = expert_pool_actions.col(pick(r_rng));
          batch.rewards += guide_weight * guide->reward(batch.obs, batch.actions, sampled);
        }
        m.composed_reward = batch.rewards.mean();
      }

      gae(batch, gamma, cfg.gae_lambda);
      normalize_advantages(batch.advantages);
      TrpoReport rep = trpo_update(policy, batch, cfg.trpo, cfg.lambda1);
      m.kl = rep.kl;
      result.trpo_reports.push_back(rep);
      detail::fit_value(policy, value_opt, batch, cfg, value_rng);
    } catch (const TrainingError& e) {
      throw diverged(std::string("iteration ") + std::to_string(it) + ": " + e.what());
    }
    if (!detail::finite_metrics(m)) throw diverged("iteration " + std::to_string(it) + ": non-finite metrics");
    if (cfg.timing) m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(m);
    if (hooks.on_iteration) hooks.on_iteration(result.metrics.back(), policy);
  }
  return result;
}

inline TrainResult train_agail(TrainConfig cfg, const IncompleteDemoSet& demos, const TrainHooks& hooks = {}) {
  cfg.algorithm = Algorithm::AGAIL;
  return train_adversarial(cfg, &demos, hooks);
}

// State-only GAIL is AGAIL without the guide.
inline TrainResult train_state_gail(TrainConfig cfg, const IncompleteDemoSet& demos, const TrainHooks& hooks = {}) {
  cfg.algorithm = Algorithm::StateGAIL;
  return train_adversarial(cfg, &demos, hooks);
}

inline TrainResult train_gail(TrainConfig cfg, const IncompleteDemoSet& demos, const TrainHooks& hooks = {}) {
  cfg.algorithm = Algorithm::GAIL;
  return train_adversarial(cfg, &demos, hooks);
}

inline TrainResult train_trpo_true(TrainConfig cfg, const TrainHooks& hooks = {}) {
  cfg.algorithm = Algorithm::TRPO;
  return train_adversarial(cfg, nullptr, hooks);
}

/// Maximum-likelihood fit of the policy head to (obs, action) pairs; returns
/// the mean negative log-likelihood of each epoch (measured before its
/// updates).
inline std::vector<double> bc_fit(StochasticPolicy& policy, const Matrix& obs, const Matrix& actions, int epochs,
                                  int minibatch, double lr, Rng& rng) {
  if (obs.cols() == 0) throw ConfigError("behaviour cloning needs at least one labelled state");
  AdamState opt(policy.num_policy_params(), lr);
  const int n = static_cast<int>(obs.cols());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int e = 0; e < epochs; ++e) {
    losses.push_back(-policy.log_prob(obs, actions).mean());
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += minibatch) {
      const int m = std::min(minibatch, n - start);
      Matrix o(obs.rows(), m), a(actions.rows(), m);
      for (int k = 0; k < m; ++k) {
        o.col(k) = obs.col(order[start + k]);
        a.col(k) = actions.col(order[start + k]);
      }
      auto pass = policy.run(o);
      // Descent on the negative log-likelihood.
      Vector g = -policy.log_prob_grad(pass, a, Vector::Constant(m, 1.0 / m));
      Vector p = policy.policy_params();
      adam_step(p, g, opt);
      policy.set_policy_params(p);
    }
  }
  return losses;
}

/// Behaviour cloning on the surviving (s_E, a_E) pairs; one iteration is one
/// epoch, evaluated on the true reward.
inline TrainResult train_bc(TrainConfig cfg, const IncompleteDemoSet& demos, const TrainHooks& hooks = {}) {
  cfg.algorithm = Algorithm::BC;
  cfg.validate();
  auto env = make_env(cfg.env);
  detail::check_demos(cfg, *env, demos);
  ExpertPairs pool = demonstrated_pairs(demos);
  if (pool.empty()) throw ConfigError("behaviour cloning needs demonstrated actions (eta < 1)");
  const auto& spec = env->spec();
  Rng init_rng = make_rng(cfg.seed, {stream::kPolicyInit});
  TrainResult result;
  result.policy = StochasticPolicy(spec.obs_dim, spec.action_space, init_rng, cfg.hidden);
  Matrix obs = observe_all(*env, pool.states);
  Matrix acts = stack_columns(pool.actions, spec.action_space.action_dim());
  Rng rng = make_rng(cfg.seed, {stream::kBc});
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    auto losses = bc_fit(result.policy, obs, acts, 1, cfg.bc_batch, cfg.bc_lr, rng);
    result.bc_loss.push_back(losses.front());
    IterationMetrics m;
    m.iter = it;
    m.true_return = evaluate(result.policy, *env, cfg.eval_episodes, cfg.seed + static_cast<std::uint64_t>(it)).mean;
    m.entropy = result.policy.entropy_from(result.policy.distribution(obs)).mean();
    m.kl = 0.0;
    if (!detail::finite_metrics(m)) {
      if (hooks.on_divergence) hooks.on_divergence(result.policy);
      throw DivergenceError("bc epoch " + std::to_string(it) + ": non-finite metrics");
    }
    if (cfg.timing) m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(m);
    if (hooks.on_iteration) hooks.on_iteration(result.metrics.back(), result.policy);
  }
  return result;
}

/// Dispatches on cfg.algorithm. `demos` may be null only for TRPO.
inline TrainResult train(const TrainConfig& cfg, const IncompleteDemoSet* demos, const TrainHooks& hooks = {}) {
  switch (cfg.algorithm) {
    case Algorithm::TRPO: return train_trpo_true(cfg, hooks);
    case Algorithm::BC:
      if (!demos) throw ConfigError("bc needs a demonstration set");
      return train_bc(cfg, *demos, hooks);
    default: return train_adversarial(cfg, demos, hooks);
  }
}

}  // namespace agail

#endif  // AGAIL_TRAINER_HPP_
