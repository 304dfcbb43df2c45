#pragma once

#include <cmath>
#include <string>

#include "hpg/policy/policy.hpp"

namespace hpg {

// Linear softmax: logits(s, a) = <phi(s, a), theta>. The tabular class is the
// special case phi(s, a) = onehot(s, a), theta in R^{|S||A|}.
class SoftmaxPolicy {
 private:
  Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions_ + a; }
  Eigen::Block<const Matrix> block(int s) const { return features_.middleRows(row(s, 0), n_actions_); }

 public:
  using state_type = int;
  using action_type = int;

  // features has one row per (s, a) pair, ordered s-major: row s * n_actions + a.
  SoftmaxPolicy(int n_states, int n_actions, Matrix features)
      : n_states_(n_states), n_actions_(n_actions), features_(std::move(features)) {
    require(n_states > 0 && n_actions > 0, "SoftmaxPolicy: empty state or action set");
    require(features_.rows() == static_cast<Eigen::Index>(n_states) * n_actions,
            "SoftmaxPolicy: feature matrix needs " + std::to_string(n_states * n_actions) + " rows");
    require(features_.cols() > 0, "SoftmaxPolicy: feature dimension must be positive");
    require(features_.allFinite(), "SoftmaxPolicy: non-finite feature");
  }

  static SoftmaxPolicy tabular(int n_states, int n_actions) {
    const Eigen::Index n = static_cast<Eigen::Index>(n_states) * n_actions;
    return SoftmaxPolicy(n_states, n_actions, Matrix::Identity(n, n));
  }

  bool is_tabular() const {
    return features_.rows() == features_.cols() &&
           features_.isApprox(Matrix::Identity(features_.rows(), features_.cols()));
  }

  Eigen::Index dim() const { return features_.cols(); }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const Matrix& features() const { return features_; }

  Vector logits(const ParamVector& theta, int s) const {
    check(theta, s);
    return block(s) * theta.values();
  }

  Vector probabilities(const ParamVector& theta, int s) const {
    Vector z = logits(theta, s);
    z.array() -= z.maxCoeff();
    z = z.array().exp();
    return z / z.sum();
  }

  Vector log_probabilities(const ParamVector& theta, int s) const {
    Vector z = logits(theta, s);
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    return z.array() - lse;
  }

  double log_density(const ParamVector& theta, int s, int a) const {
    check_action(a);
    return log_probabilities(theta, s)[a];
  }

  // phi(s, a) - E_{a' ~ pi(.|s)} phi(s, a')
  Vector score(const ParamVector& theta, int s, int a) const {
    check_action(a);
    const Vector p = probabilities(theta, s);
    return features_.row(row(s, a)).transpose() - block(s).transpose() * p;
  }

  ScoreEval score_eval(const ParamVector& theta, int s, int a) const { return {score(theta, s, a), false}; }

  int sample_action(const ParamVector& theta, int s, Rng& rng) const {
    const Vector p = probabilities(theta, s);
    const double u = uniform01(rng);
    double acc = 0.0;
    for (int a = 0; a < n_actions_; ++a) {
      acc += p[a];
      if (u < acc) return a;
    }
    for (int a = n_actions_ - 1; a >= 0; --a) {
      if (p[a] > 0.0) return a;
    }
    return n_actions_ - 1;
  }

  // KL is locally quadratic and the score Lipschitz in theta.
  SmoothnessSpec smoothness() const { return SmoothnessSpec(2.0, 1.0); }

  double kl_divergence(const ParamVector& theta1, const ParamVector& theta2, int s) const {
    const Vector lp1 = log_probabilities(theta1, s);
    const Vector lp2 = log_probabilities(theta2, s);
    double kl = 0.0;
    for (int a = 0; a < n_actions_; ++a) {
      const double p = std::exp(lp1[a]);
      if (p > 0.0) kl += p * (lp1[a] - lp2[a]);
    }
    return std::max(kl, 0.0);
  }

 private:

  void check(const ParamVector& theta, int s) const {
    require(theta.dim() == dim(), "SoftmaxPolicy: theta has dimension " + std::to_string(theta.dim()) +
                                      ", expected " + std::to_string(dim()));
    require(s >= 0 && s < n_states_, "SoftmaxPolicy: state out of range");
  }
  void check_action(int a) const { require(a >= 0 && a < n_actions_, "SoftmaxPolicy: action out of range"); }

  int n_states_;
  int n_actions_;
  Matrix features_;
};

}  // namespace hpg
