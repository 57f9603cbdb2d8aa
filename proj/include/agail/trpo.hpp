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

#ifndef AGAIL_TRPO_HPP_
#define AGAIL_TRPO_HPP_

#include <cmath>
#include <utility>

#include "agail/numcore.hpp"
#include "agail/policy.hpp"

namespace agail {

struct TrpoConfig {
  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_coeff = 0.8;
  int backtrack_steps = 10;
  // Minimum ratio of actual to expected surrogate improvement.
  double accept_ratio = 0.1;
  // Use every k-th sample for Fisher-vector products.
  int fvp_stride = 1;

  void validate() const {
    if (!(max_kl > 0) || cg_iters <= 0 || !(cg_damping >= 0) || backtrack_steps <= 0 || fvp_stride <= 0 ||
        !(accept_ratio >= 0))
      throw ConfigError("trpo: constants must be positive");
    if (!(backtrack_coeff > 0 && backtrack_coeff < 1)) throw ConfigError("trpo: backtrack_coeff must be in (0, 1)");
  }
};

struct CgResult {
  Vector x;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Solves A x = b for a symmetric positive (semi-)definite operator given
/// only as a matrix-vector product.
template <typename MatVec>
CgResult conjugate_gradient(MatVec&& matvec, const Vector& b, int iters, double tol = 1e-10) {
  CgResult res;
  res.x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = b;
  double rr = r.squaredNorm();
  for (int i = 0; i < iters; ++i) {
    if (std::sqrt(rr) <= tol) break;
    Vector ap = matvec(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap) || !ap.allFinite()) throw TrainingError("conjugate gradient: non-finite operator product");
    if (pap <= 0) break;
    const double alpha = rr / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++res.iterations;
  }
  if (!res.x.allFinite()) throw TrainingError("conjugate gradient: non-finite solution");
  res.residual_norm = std::sqrt(rr);
  return res;
}

/// Surrogate objective of a batch against frozen old log-probs:
///   mean_j exp(logp(a_j|s_j) - old_logp_j) * A_j + entropy_coef * mean_j H(s_j)
class Surrogate {
 public:
  Surrogate(const Matrix& obs, const Matrix& actions, const Vector& advantages, const Vector& old_log_probs,
            double entropy_coef)
      : obs_(obs), actions_(actions), adv_(advantages), old_lp_(old_log_probs), entropy_coef_(entropy_coef) {
    if (adv_.size() != obs_.cols() || old_lp_.size() != obs_.cols() || actions_.cols() != obs_.cols())
      throw InputError("surrogate: batch arrays misaligned");
  }

  double value(const StochasticPolicy& policy) const {
    Matrix out = policy.distribution(obs_);
    Vector lp = policy.log_prob_from(out, actions_);
    const double n = static_cast<double>(adv_.size());
    double s = ((lp - old_lp_).array().exp() * adv_.array()).sum() / n;
    if (entropy_coef_ != 0.0) s += entropy_coef_ * policy.entropy_from(out).mean();
    return s;
  }

  Vector gradient(const StochasticPolicy& policy) const {
    auto pass = policy.run(obs_);
    Vector lp = policy.log_prob_from(pass.out(), actions_);
    const double n = static_cast<double>(adv_.size());
    Vector w = (lp - old_lp_).array().exp() * adv_.array() / n;
    Vector g = policy.log_prob_grad(pass, actions_, w);
    if (entropy_coef_ != 0.0) g += policy.entropy_grad(pass, Vector::Constant(adv_.size(), entropy_coef_ / n));
    return g;
  }

 private:
  const Matrix& obs_;
  const Matrix& actions_;
  const Vector& adv_;
  const Vector& old_lp_;
  double entropy_coef_;
};

/// Fisher information of the policy (Hessian of the mean KL at the current
/// parameters) applied to v, computed as J^T M J v with forward- and
/// reverse-mode passes. `pass` must come from policy.run on the same
/// observations.
inline Vector fisher_vector_product(const StochasticPolicy& policy, const StochasticPolicy::Pass& pass,
                                    const Vector& v, double damping) {
  const double n = static_cast<double>(pass.out().cols());
  auto [d_out, d_ls] = policy.policy_jvp(pass, v);
  Matrix m_out(d_out.rows(), d_out.cols());
  Vector m_ls = Vector::Zero(d_ls.size());
  if (policy.discrete()) {
    Matrix p = log_softmax(pass.out()).array().exp();
    for (Eigen::Index j = 0; j < d_out.cols(); ++j) {
      const double pu = p.col(j).dot(d_out.col(j));
      m_out.col(j) = (p.col(j).array() * d_out.col(j).array() - p.col(j).array() * pu) / n;
    }
  } else {
    Vector inv_var = (-2.0 * policy.log_std()).array().exp();
    m_out = (d_out.array().colwise() * inv_var.array()) / n;
    m_ls = 2.0 * d_ls;
  }
  return policy.policy_vjp(pass, m_out, m_ls) + damping * v;
}

inline double mean_kl(const StochasticPolicy& old_policy, const Matrix& old_out, const StochasticPolicy& new_policy,
                      const Matrix& obs) {
  return kl_from(old_policy, old_out, new_policy, new_policy.distribution(obs)).mean();
}

struct TrpoReport {
  bool accepted = false;
  // Nothing to do: the surrogate gradient vanished.
  bool noop = false;
  double kl = 0.0;
  double surrogate_delta = 0.0;
  double expected_improve = 0.0;
  int backtracks = 0;
  double cg_residual = 0.0;
};

/**
 * One trust-region step on the batch's advantages (used as given; the
 * caller normalizes). Either the parameters move to a point whose mean
 * KL from the old policy is at most 1.5 * max_kl with a positive, large
 * enough surrogate improvement, or they are restored bit-for-bit.
 */
inline TrpoReport trpo_update(StochasticPolicy& policy, const RolloutBatch& batch, const TrpoConfig& cfg,
                              double entropy_coef = 0.0) {
  cfg.validate();
  TrpoReport report;
  if (batch.size() == 0) {
    report.noop = true;
    return report;
  }
  if (batch.advantages.size() != batch.size()) throw InputError("trpo_update: advantages not computed");

  const Matrix old_out = policy.distribution(batch.obs);
  const Vector old_lp = policy.log_prob_from(old_out, batch.actions);
  const StochasticPolicy old_policy = policy;
  const Vector theta_old = policy.policy_params();

  Surrogate surrogate(batch.obs, batch.actions, batch.advantages, old_lp, entropy_coef);
  const double base = surrogate.value(policy);
  const Vector g = surrogate.gradient(policy);
  if (!g.allFinite()) throw TrainingError("trpo_update: non-finite policy gradient");
  if (g.squaredNorm() == 0.0) {
    report.noop = true;
    return report;
  }

  Matrix sub_obs = batch.obs;
  if (cfg.fvp_stride > 1) {
    const Eigen::Index m = (batch.obs.cols() + cfg.fvp_stride - 1) / cfg.fvp_stride;
    sub_obs.resize(batch.obs.rows(), m);
    for (Eigen::Index j = 0; j < m; ++j) sub_obs.col(j) = batch.obs.col(j * cfg.fvp_stride);
  }
  const auto pass = policy.run(sub_obs);
  auto fvp = [&](const Vector& v) { return fisher_vector_product(policy, pass, v, cfg.cg_damping); };

  const CgResult cg = conjugate_gradient(fvp, g, cfg.cg_iters);
  report.cg_residual = cg.residual_norm;
  const double shs = 0.5 * cg.x.dot(fvp(cg.x));
  if (!(shs > 0) || !std::isfinite(shs)) {
    report.noop = true;
    return report;
  }
  const Vector full_step = cg.x * std::sqrt(cfg.max_kl / shs);
  const double expected = g.dot(full_step);
  report.expected_improve = expected;

  double fraction = 1.0;
  for (int k = 0; k < cfg.backtrack_steps; ++k, fraction *= cfg.backtrack_coeff) {
    policy.set_policy_params(theta_old + fraction * full_step);
    const double improve = surrogate.value(policy) - base;
    const double kl = mean_kl(old_policy, old_out, policy, batch.obs);
    report.backtracks = k;
    if (std::isfinite(improve) && std::isfinite(kl) && kl <= 1.5 * cfg.max_kl && improve > 0 &&
        improve / (expected * fraction) > cfg.accept_ratio) {
      report.accepted = true;
      report.kl = kl;
      report.surrogate_delta = improve;
      return report;
    }
  }
  policy.set_policy_params(theta_old);
  return report;
}

}  // namespace agail

#endif  // AGAIL_TRPO_HPP_
