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

#include "agail/guide.hpp"
#include "test_util.hpp"

namespace agail {
namespace {

using testing::numeric_gradient;
using testing::random_matrix;
using testing::relative_error;
using testing::vec;

Matrix row(std::initializer_list<double> xs) { return vec(xs).transpose(); }

Guide zero_output_guide(int obs_dim, const ActionSpace& space, Rng& rng) {
  const int out = space.is_discrete() ? space.n() : 2 * space.n();
  Mlp first = Mlp::make({obs_dim + space.encoded_dim(), 8}, Activation::Tanh, Activation::Tanh, rng);
  std::vector<Layer> layers = first.layers();
  layers.push_back(Layer{Matrix::Zero(out, 8), Vector::Zero(out), Activation::Identity});
  return Guide(obs_dim, space, Mlp(layers));
}

Matrix random_discrete(int n, int cols, Rng& rng) {
  std::uniform_int_distribution<int> u(0, n - 1);
  Matrix a(1, cols);
  for (int j = 0; j < cols; ++j) a(0, j) = u(rng);
  return a;
}

TEST(Guide, ZeroOutputNllIsLogActionCount) {
  Rng rng = make_rng(1);
  for (int n : {2, 3, 5}) {
    Guide g = zero_output_guide(2, ActionSpace::discrete(n), rng);
    Matrix obs = random_matrix(2, 20, rng);
    EXPECT_NEAR(g.nll(obs, random_discrete(n, 20, rng), random_discrete(n, 20, rng)), std::log(n), 1e-12);
  }
}

TEST(Guide, UniformPosteriorRewardIsOneHalf) {
  Rng rng = make_rng(2);
  Guide g = zero_output_guide(3, ActionSpace::discrete(2), rng);
  EXPECT_DOUBLE_EQ(g.reward(vec({1}), vec({0}), vec({0.1, 0.2, 0.3})), 0.5);
}

TEST(Guide, ContinuousRewardAtPredictedMeanIsOne) {
  Rng rng = make_rng(3);
  ActionSpace space = ActionSpace::box(vec({-1, -1}), vec({1, 1}));
  Guide g(3, space, rng, {6});
  Matrix obs = random_matrix(3, 5, rng);
  Matrix act = random_matrix(2, 5, rng);
  Matrix mean = g.net().forward(g.inputs(obs, act)).topRows(2);
  Vector r = g.reward(obs, act, mean);
  for (Eigen::Index j = 0; j < r.size(); ++j) EXPECT_NEAR(r(j), 1.0, 1e-15);
}

class GuideRewardRange : public ::testing::TestWithParam<bool> {};

TEST_P(GuideRewardRange, RewardLiesInUnitInterval) {
  const bool discrete = GetParam();
  Rng rng = make_rng(4);
  ActionSpace space = discrete ? ActionSpace::discrete(3) : ActionSpace::box(vec({-1}), vec({1}));
  Guide g(2, space, rng, {6});
  Vector params = g.net().params();
  std::normal_distribution<double> nd(0.0, 2.0);
  for (Eigen::Index i = 0; i < params.size(); ++i) params(i) += nd(rng);
  g.net().set_params(params);
  const int n = 500;
  Matrix obs = 3.0 * random_matrix(2, n, rng);
  Matrix pa = discrete ? random_discrete(3, n, rng) : Matrix(random_matrix(1, n, rng));
  Matrix ea = discrete ? random_discrete(3, n, rng) : Matrix(5.0 * random_matrix(1, n, rng));
  Vector r = g.reward(obs, pa, ea);
  for (Eigen::Index j = 0; j < n; ++j) {
    EXPECT_GT(r(j), 0.0);
    EXPECT_LE(r(j), 1.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Spaces, GuideRewardRange, ::testing::Bool());

class GuideGradient : public ::testing::TestWithParam<bool> {};

TEST_P(GuideGradient, MatchesFiniteDifferences) {
  const bool discrete = GetParam();
  Rng rng = make_rng(5);
  ActionSpace space = discrete ? ActionSpace::discrete(3) : ActionSpace::box(vec({-1, -1}), vec({1, 1}));
  Guide g(2, space, rng, {7, 5});
  Vector params = g.net().params();
  std::normal_distribution<double> nd(0.0, 0.3);
  for (Eigen::Index i = 0; i < params.size(); ++i) params(i) += nd(rng);
  g.net().set_params(params);
  const int n = 8;
  Matrix obs = random_matrix(2, n, rng);
  Matrix pa = discrete ? random_discrete(3, n, rng) : Matrix(random_matrix(2, n, rng));
  Matrix ea = discrete ? random_discrete(3, n, rng) : Matrix(random_matrix(2, n, rng));
  Guide probe = g;
  Vector numeric = numeric_gradient(
      [&](const Vector& p) {
        probe.net().set_params(p);
        return probe.nll(obs, pa, ea);
      },
      params);
  EXPECT_LE(relative_error(g.nll_gradient(obs, pa, ea), numeric), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Spaces, GuideGradient, ::testing::Bool());

TEST(Guide, ShapeMismatchThrows) {
  Rng rng = make_rng(6);
  Guide g(2, ActionSpace::discrete(2), rng, {4});
  EXPECT_THROW(g.nll(random_matrix(3, 4, rng), row({0, 1, 0, 1}), row({0, 1, 0, 1})), InputError);
  EXPECT_THROW(g.nll(random_matrix(2, 4, rng), row({0, 1, 0}), row({0, 1, 0, 1})), InputError);
  EXPECT_THROW(g.nll(random_matrix(2, 4, rng), row({0, 1, 0, 1}), row({0, 1})), InputError);
}

TEST(QUpdate, EmptyBatchLeavesGuideUntouched) {
  Rng rng = make_rng(7);
  Guide g(2, ActionSpace::discrete(2), rng, {4});
  const Vector before = g.net().params();
  GuideReport r = q_update(g, Matrix(2, 0), Matrix(1, 0), Matrix(1, 0));
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(g.net().params(), before);
}

TEST(QUpdate, SmallStepsDescendOnFixedBatch) {
  Rng rng = make_rng(8);
  Guide g(2, ActionSpace::discrete(3), rng, {16, 16}, 1e-4);
  Matrix obs = random_matrix(2, 64, rng);
  Matrix pa = random_discrete(3, 64, rng), ea = random_discrete(3, 64, rng);
  for (int k = 0; k < 50; ++k) {
    auto r = q_update(g, obs, ea, pa);
    EXPECT_LT(r.nll_after, r.nll_before) << "step " << k;
  }
}

TEST(QUpdate, LearnsDeterministicExpert) {
  Rng rng = make_rng(9);
  Guide g(1, ActionSpace::discrete(2), rng);
  std::uniform_real_distribution<double> side(0.2, 1.0);
  std::bernoulli_distribution coin(0.5);
  auto draw = [&](int n, Matrix& obs, Matrix& pa, Matrix& ea) {
    obs.resize(1, n);
    pa.resize(1, n);
    ea.resize(1, n);
    for (int j = 0; j < n; ++j) {
      obs(0, j) = coin(rng) ? side(rng) : -side(rng);
      ea(0, j) = obs(0, j) > 0 ? 1 : 0;
      pa(0, j) = coin(rng) ? 1 : 0;
    }
  };
  Matrix obs, pa, ea;
  for (int k = 0; k < 1000; ++k) {
    draw(128, obs, pa, ea);
    q_update(g, obs, ea, pa);
  }
  draw(2000, obs, pa, ea);
  EXPECT_LT(g.nll(obs, pa, ea), 0.1);
}

TEST(LowerBound, UniformPosteriorAndMarginalCancel) {
  Rng rng = make_rng(10);
  Guide g = zero_output_guide(1, ActionSpace::discrete(2), rng);
  Matrix obs = random_matrix(1, 4, rng);
  EXPECT_NEAR(lower_bound_estimate(g, obs, row({0, 1, 0, 1}), row({1, 1, 0, 0})), 0.0, 1e-12);
}

TEST(LowerBound, PerfectPosteriorReachesLnTwo) {
  // Logit gap of 40 in favour of the action equal to sign(s).
  Mlp net({Layer{(Matrix(2, 3) << -20, 0, 0, 20, 0, 0).finished(), Vector::Zero(2), Activation::Identity}});
  Guide g(1, ActionSpace::discrete(2), net);
  Matrix obs = row({-1, 1, -1, 1});
  Matrix ea = row({0, 1, 0, 1});
  EXPECT_NEAR(lower_bound_estimate(g, obs, ea, row({0, 0, 1, 1})), std::numbers::ln2, 1e-12);
}

TEST(LowerBound, EmptyBatchThrows) {
  Rng rng = make_rng(11);
  Guide g(1, ActionSpace::discrete(2), rng, {4});
  EXPECT_THROW(lower_bound_estimate(g, Matrix(1, 0), Matrix(1, 0), Matrix(1, 0)), InputError);
}

TEST(MarginalEntropy, DiscreteAndGaussian) {
  EXPECT_NEAR(action_marginal_entropy(ActionSpace::discrete(2), row({0, 1, 1, 0})), std::numbers::ln2, 1e-15);
  EXPECT_DOUBLE_EQ(action_marginal_entropy(ActionSpace::discrete(3), row({2, 2, 2})), 0.0);
  // Samples +-1 have variance 1.
  EXPECT_NEAR(action_marginal_entropy(ActionSpace::box(vec({-2}), vec({2})), row({-1, 1, -1, 1})),
              0.5 * std::log(2 * std::numbers::pi * std::numbers::e), 1e-12);
}

// Two states, two actions. s is uniform, the expert matches s with
// probability 0.9 and the policy action is independent noise, so the mutual
// information between a_E and (a, s) is ln 2 - H(0.9) by enumeration.
TEST(LowerBound, StaysBelowExactMutualInformation) {
  const double p_match = 0.9, p_policy = 0.7;
  double mi = 0.0;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a)
      for (int e = 0; e < 2; ++e) {
        const double p_s = 0.5;
        const double p_a = a == s ? p_policy : 1 - p_policy;
        const double p_e_given = e == s ? p_match : 1 - p_match;
        const double joint = p_s * p_a * p_e_given;
        double p_e = 0.0;
        for (int s2 = 0; s2 < 2; ++s2) p_e += 0.5 * (e == s2 ? p_match : 1 - p_match);
        mi += joint * std::log(p_e_given / p_e);
      }
  const double hb = -(p_match * std::log(p_match) + (1 - p_match) * std::log(1 - p_match));
  ASSERT_NEAR(mi, std::numbers::ln2 - hb, 1e-12);

  Rng rng = make_rng(12);
  std::bernoulli_distribution coin(0.5), match(p_match), follow(p_policy);
  auto draw = [&](int n, Matrix& obs, Matrix& pa, Matrix& ea) {
    obs.resize(1, n);
    pa.resize(1, n);
    ea.resize(1, n);
    for (int j = 0; j < n; ++j) {
      const int s = coin(rng) ? 1 : 0;
      obs(0, j) = s;
      pa(0, j) = follow(rng) ? s : 1 - s;
      ea(0, j) = match(rng) ? s : 1 - s;
    }
  };
  Guide g(1, ActionSpace::discrete(2), rng, {16}, 1e-2);
  Matrix eval_obs, eval_pa, eval_ea;
  draw(20000, eval_obs, eval_pa, eval_ea);
  Matrix obs, pa, ea;
  double bound = lower_bound_estimate(g, eval_obs, eval_ea, eval_pa);
  for (int k = 0; k < 300; ++k) {
    draw(256, obs, pa, ea);
    q_update(g, obs, ea, pa);
    if (k % 20 == 19) {
      bound = lower_bound_estimate(g, eval_obs, eval_ea, eval_pa);
      EXPECT_LE(bound, mi + 0.02) << "update " << k;
    }
  }
  // A trained guide should get most of the way there.
  EXPECT_GT(bound, mi - 0.05);
}

}  // namespace
}  // namespace agail
