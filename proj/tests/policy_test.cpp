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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "agail/policy.hpp"
#include "test_util.hpp"

namespace agail {
namespace {

using testing::numeric_gradient;
using testing::relative_error;

using testing::constant_policy;
using testing::random_matrix;
using testing::random_policy;
using testing::vec;

TEST(Act, UniformTwoActionLogProb) {
  auto p = constant_policy(ActionSpace::discrete(2), Vector::Zero(2));
  Rng rng = make_rng(1);
  auto [a, lp] = p.act(Vector::Zero(2), rng);
  EXPECT_NEAR(lp, -std::log(2.0), 1e-15);
  EXPECT_TRUE(a(0) == 0.0 || a(0) == 1.0);
}

TEST(Act, GaussianSampleReplaysToSameLogProb) {
  Rng rng = make_rng(4);
  auto p = random_policy(false, 2);
  Vector obs = vec({0.1, -0.3, 0.7});
  for (int k = 0; k < 20; ++k) {
    auto [a, lp] = p.act(obs, rng);
    EXPECT_NEAR(lp, p.log_prob(obs, a), 1e-12);
  }
}

TEST(Act, CategoricalFrequenciesMatchProbabilities) {
  Vector logits = vec({0.0, std::log(2.0), std::log(5.0)});  // p = (1, 2, 5) / 8
  auto p = constant_policy(ActionSpace::discrete(3), logits);
  Rng rng = make_rng(9);
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int k = 0; k < n; ++k) ++counts[static_cast<int>(p.act(Vector::Zero(2), rng).first(0))];
  const double probs[] = {1.0 / 8, 2.0 / 8, 5.0 / 8};
  for (int i = 0; i < 3; ++i) {
    const double sigma = std::sqrt(n * probs[i] * (1 - probs[i]));
    EXPECT_NEAR(counts[i], n * probs[i], 3 * sigma);
  }
}

TEST(Act, ModePicksArgmaxOrMean) {
  auto d = constant_policy(ActionSpace::discrete(3), vec({0.1, 2.0, -1.0}));
  EXPECT_EQ(d.mode(Vector::Zero(2))(0), 1.0);
  auto c = constant_policy(ActionSpace::box(vec({-1}), vec({1})), vec({0.25}), vec({0.0}));
  EXPECT_EQ(c.mode(Vector::Zero(2))(0), 0.25);
}

TEST(Densities, StandardGaussianAtMean) {
  auto p = constant_policy(ActionSpace::box(vec({-5}), vec({5})), vec({0.0}), vec({0.0}));
  EXPECT_NEAR(p.log_prob(Vector::Zero(2), vec({0.0})), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(-0.5 * std::log(2 * std::numbers::pi), -0.9189, 1e-4);
}

TEST(Densities, UniformCategoricalEntropyIsLogN) {
  for (int n : {2, 3, 7}) {
    auto p = constant_policy(ActionSpace::discrete(n), Vector::Zero(n));
    EXPECT_NEAR(p.entropy(Vector::Zero(2)), std::log(n), 1e-14);
  }
}

TEST(Densities, GaussianEntropyPerDimension) {
  Vector ls = vec({-0.5, 0.3});
  auto p = constant_policy(ActionSpace::box(vec({-1, -1}), vec({1, 1})), vec({0, 0}), ls);
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double var = std::exp(2 * ls(i));
    expected += 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * var);
  }
  EXPECT_NEAR(p.entropy(Vector::Zero(2)), expected, 1e-14);
}

TEST(Densities, CategoricalEntropyIsNonNegative) {
  auto p = random_policy(true, 5);
  Rng rng = make_rng(5);
  Matrix obs = random_matrix(3, 200, rng) * 3.0;
  EXPECT_GE(p.entropy_from(p.distribution(obs)).minCoeff(), 0.0);
}

TEST(Kl, SelfDivergenceIsZero) {
  for (bool d : {true, false}) {
    auto p = random_policy(d, 6);
    EXPECT_NEAR(kl(p, p, vec({0.2, 0.4, -1.0})), 0.0, 1e-15);
  }
}

TEST(Kl, GaussianMatchesClosedForm) {
  const double m1 = 0.3, m2 = -0.4, s1 = 0.7, s2 = 1.6;
  auto a = constant_policy(ActionSpace::box(vec({-1}), vec({1})), vec({m1}), vec({std::log(s1)}));
  auto b = constant_policy(ActionSpace::box(vec({-1}), vec({1})), vec({m2}), vec({std::log(s2)}));
  const double expected = std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2 * s2 * s2) - 0.5;
  EXPECT_NEAR(kl(a, b, Vector::Zero(2)), expected, 1e-14);
}

TEST(Kl, CategoricalMatchesDefinitionAndIsNonNegative) {
  Vector la = vec({0.2, -1.0, 0.5}), lb = vec({1.0, 0.0, -0.3});
  auto a = constant_policy(ActionSpace::discrete(3), la);
  auto b = constant_policy(ActionSpace::discrete(3), lb);
  Vector pa = la.array().exp() / la.array().exp().sum(), pb = lb.array().exp() / lb.array().exp().sum();
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) expected += pa(i) * std::log(pa(i) / pb(i));
  EXPECT_NEAR(kl(a, b, Vector::Zero(2)), expected, 1e-14);
  Rng rng = make_rng(3);
  for (int k = 0; k < 50; ++k) {
    auto p = random_policy(k % 2 == 0, 100 + static_cast<std::uint64_t>(k));
    auto q = random_policy(k % 2 == 0, 200 + static_cast<std::uint64_t>(k));
    Matrix obs = random_matrix(3, 4, rng);
    EXPECT_GE(kl_from(p, p.distribution(obs), q, q.distribution(obs)).minCoeff(), 0.0);
  }
}

TEST(Gradients, LogProbMatchesFiniteDifferences) {
  Rng rng = make_rng(11);
  for (bool d : {true, false}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto p = random_policy(d, seed);
      Matrix obs = random_matrix(3, 4, rng);
      Matrix acts(p.action_space().action_dim(), 4);
      for (int j = 0; j < 4; ++j) acts.col(j) = p.act(Vector(obs.col(j)), rng).first;
      Vector w = random_matrix(4, 1, rng).col(0);
      Vector g = p.log_prob_grad(p.run(obs), acts, w);
      auto f = [&](const Vector& theta) {
        StochasticPolicy q = p;
        q.set_policy_params(theta);
        return q.log_prob(obs, acts).dot(w);
      };
      EXPECT_LE(relative_error(g, numeric_gradient(f, p.policy_params())), 1e-4) << d << " " << seed;
    }
  }
}

TEST(Gradients, EntropyMatchesFiniteDifferences) {
  Rng rng = make_rng(12);
  for (bool d : {true, false}) {
    auto p = random_policy(d, 7);
    Matrix obs = random_matrix(3, 5, rng);
    Vector w = Vector::Constant(5, 0.2);
    Vector g = p.entropy_grad(p.run(obs), w);
    auto f = [&](const Vector& theta) {
      StochasticPolicy q = p;
      q.set_policy_params(theta);
      return q.entropy_from(q.distribution(obs)).dot(w);
    };
    EXPECT_LE(relative_error(g, numeric_gradient(f, p.policy_params())), 1e-4);
  }
}

TEST(Gradients, ValueMatchesFiniteDifferences) {
  Rng rng = make_rng(13);
  auto p = random_policy(true, 8);
  Matrix obs = random_matrix(3, 6, rng);
  Vector up = random_matrix(6, 1, rng).col(0);
  Vector g = p.value_grad(obs, up);
  auto f = [&](const Vector& theta) {
    StochasticPolicy q = p;
    q.set_value_params(theta);
    return q.value(obs).dot(up);
  };
  EXPECT_LE(relative_error(g, numeric_gradient(f, p.value_params())), 1e-4);
  Matrix feats = p.run(obs).features();
  Vector gh = p.value_head_grad(feats, up);
  EXPECT_TRUE(gh.isApprox(g.tail(gh.size()), 1e-12));
}

TEST(Gradients, JvpMatchesDirectionalDerivative) {
  Rng rng = make_rng(14);
  for (bool d : {true, false}) {
    auto p = random_policy(d, 9);
    Matrix obs = random_matrix(3, 4, rng);
    Vector v = random_matrix(p.num_policy_params(), 1, rng).col(0);
    auto [d_out, d_ls] = p.policy_jvp(p.run(obs), v);
    const double h = 1e-6;
    StochasticPolicy up = p, down = p;
    up.set_policy_params(p.policy_params() + h * v);
    down.set_policy_params(p.policy_params() - h * v);
    Matrix fd = (up.distribution(obs) - down.distribution(obs)) / (2 * h);
    EXPECT_LE((d_out - fd).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_EQ(d_ls.size(), d ? 0 : 2);
  }
}

TEST(Params, LayoutIsTrunkHeadLogStd) {
  auto p = random_policy(false, 1);
  const int n = p.trunk().num_params() + p.head().num_params() + 2;
  EXPECT_EQ(p.num_policy_params(), n);
  Vector theta = p.policy_params();
  EXPECT_TRUE(same_values(theta.tail(2), p.log_std()));
  theta.tail(2) << 0.5, -0.5;
  p.set_policy_params(theta);
  EXPECT_EQ(p.log_std()(0), 0.5);
  EXPECT_EQ(p.num_value_params(), p.trunk().num_params() + p.value_head().num_params());
}

TEST(Init, ContinuousLogStdStartsAtZeroAndHeadIsSmall) {
  Rng rng = make_rng(0);
  StochasticPolicy p(3, ActionSpace::box(vec({-2}), vec({2})), rng);
  EXPECT_TRUE(p.log_std().isZero(0.0));
  EXPECT_LE(p.head().layers().back().weight.cwiseAbs().maxCoeff(), 0.01 / std::sqrt(100.0) + 1e-15);
  EXPECT_EQ(p.trunk().layers().size(), 3u);
}

// Independent double-loop GAE: A_t = sum_k (gamma lambda)^k delta_{t+k}.
Vector brute_force_gae(const Vector& r, const Vector& v, double last_value, double gamma, double lambda) {
  const int n = static_cast<int>(r.size());
  Vector delta(n), adv(n);
  for (int t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v(t + 1) : last_value;
    delta(t) = r(t) + gamma * next - v(t);
  }
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    for (int k = 0; t + k < n; ++k) s += std::pow(gamma * lambda, k) * delta(t + k);
    adv(t) = s;
  }
  return adv;
}

RolloutBatch one_episode(const Vector& r, const Vector& v, bool terminated, double bootstrap) {
  RolloutBatch b;
  b.obs = Matrix::Zero(1, r.size());
  b.rewards = r;
  b.values = v;
  EpisodeSpan ep;
  ep.start = 0;
  ep.length = static_cast<int>(r.size());
  ep.terminated = terminated;
  ep.bootstrap_value = bootstrap;
  b.episodes = {ep};
  return b;
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  Rng rng = make_rng(2);
  Vector r = random_matrix(6, 1, rng).col(0), v = random_matrix(6, 1, rng).col(0);
  auto b = one_episode(r, v, false, 0.8);
  gae(b, 0.9, 0.0);
  for (int t = 0; t < 6; ++t) {
    const double next = t < 5 ? v(t + 1) : 0.8;
    EXPECT_NEAR(b.advantages(t), r(t) + 0.9 * next - v(t), 1e-14);
  }
  EXPECT_TRUE(b.returns.isApprox(b.advantages + v));
}

TEST(Gae, LambdaOneZeroValuesIsRewardToGo) {
  Vector r = vec({1, 2, 3, 4});
  auto b = one_episode(r, Vector::Zero(4), true, 0.0);
  gae(b, 0.5, 1.0);
  EXPECT_NEAR(b.advantages(0), 1 + 0.5 * 2 + 0.25 * 3 + 0.125 * 4, 1e-14);
  EXPECT_NEAR(b.advantages(3), 4.0, 1e-14);
}

TEST(Gae, MatchesDoubleLoopAcrossEpisodes) {
  Rng rng = make_rng(3);
  Vector r = random_matrix(20, 1, rng).col(0), v = random_matrix(20, 1, rng).col(0);
  // Two episodes: 12 steps terminated, 8 steps truncated with bootstrap 0.6.
  RolloutBatch b;
  b.obs = Matrix::Zero(1, 20);
  b.rewards = r;
  b.values = v;
  b.episodes = {EpisodeSpan{0, 12, true, {}, 0.0, 0.0}, EpisodeSpan{12, 8, false, {}, 0.6, 0.0}};
  gae(b, 0.995, 0.97);
  Vector a1 = brute_force_gae(r.head(12), v.head(12), 0.0, 0.995, 0.97);
  Vector a2 = brute_force_gae(r.tail(8), v.tail(8), 0.6, 0.995, 0.97);
  EXPECT_LE((b.advantages.head(12) - a1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((b.advantages.tail(8) - a2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gae, RejectsMisalignedArrays) {
  auto b = one_episode(vec({1, 2}), vec({0}), true, 0.0);
  EXPECT_THROW(gae(b, 0.9, 0.9), InputError);
}

TEST(NormalizeAdvantages, ZeroMeanUnitStd) {
  Rng rng = make_rng(4);
  Vector a = random_matrix(500, 1, rng).col(0) * 7.0 + Vector::Constant(500, 3.0);
  normalize_advantages(a);
  EXPECT_NEAR(a.mean(), 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(a.squaredNorm() / 500.0), 1.0, 1e-9);
  Vector c = Vector::Constant(4, 2.5);
  normalize_advantages(c);
  EXPECT_TRUE(c.isZero(0.0));
}

TEST(Checkpoint, RoundTripsBothKinds) {
  for (bool d : {true, false}) {
    auto p = random_policy(d, 21);
    std::stringstream ss;
    write_policy(ss, p, "pointmass", "agail");
    auto ck = read_policy(ss);
    EXPECT_EQ(ck.env, "pointmass");
    EXPECT_EQ(ck.algo, "agail");
    EXPECT_TRUE(same_values(ck.policy.policy_params(), p.policy_params()));
    EXPECT_TRUE(same_values(ck.policy.value_params(), p.value_params()));
    EXPECT_TRUE(ck.policy.action_space() == p.action_space());
  }
}

TEST(Checkpoint, RejectsCorruptFiles) {
  auto p = random_policy(true, 22);
  std::stringstream ss;
  write_policy(ss, p, "cartpole", "trpo");
  std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_policy(truncated), ParseError);
  std::stringstream wrong_header("AGAIL-POLICY v2 env=x algo=y\n");
  EXPECT_THROW(read_policy(wrong_header), ParseError);
  std::string bad = text;
  bad.replace(bad.find("action discrete 3"), 17, "action discrete 4");
  std::stringstream mismatched(bad);
  EXPECT_THROW(read_policy(mismatched), ParseError);
}

}  // namespace
}  // namespace agail
