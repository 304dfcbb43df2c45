#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hpg/policy/policy.hpp"
#include "hpg/quadrature.hpp"

namespace hpg {

// Exponential-power location family on the real line:
//   pi_theta(a|s) = exp(-|a - mu_s|^kappa) / (2 Gamma(1 + 1/kappa)),  mu_s = <f(s), theta>.
// kappa = 2 is the Gaussian with variance 1/2; kappa < 2 has heavier tails.
class GeneralizedGaussianPolicy {
 public:
  using state_type = int;
  using action_type = double;

  // state_features: one row f(s) per state.
  GeneralizedGaussianPolicy(double kappa, Matrix state_features)
      : kappa_(kappa), features_(std::move(state_features)) {
    require(kappa > 1.0 && kappa <= 2.0, "GeneralizedGaussianPolicy: kappa must lie in (1,2]");
    require(features_.rows() > 0 && features_.cols() > 0, "GeneralizedGaussianPolicy: empty feature map");
    require(features_.allFinite(), "GeneralizedGaussianPolicy: non-finite feature");
    log_norm_ = std::log(2.0) + std::lgamma(1.0 + 1.0 / kappa_);
  }

  // Single state, mu = theta (scalar parameter).
  static GeneralizedGaussianPolicy location(double kappa) {
    return GeneralizedGaussianPolicy(kappa, Matrix::Ones(1, 1));
  }

  double kappa() const { return kappa_; }
  Eigen::Index dim() const { return features_.cols(); }
  int n_states() const { return static_cast<int>(features_.rows()); }
  const Matrix& features() const { return features_; }

  // 2 Gamma(1 + 1/kappa)
  double normalizer() const { return std::exp(log_norm_); }

  double mean(const ParamVector& theta, int s) const {
    require(theta.dim() == dim(), "GeneralizedGaussianPolicy: theta has dimension " +
                                      std::to_string(theta.dim()) + ", expected " + std::to_string(dim()));
    require(s >= 0 && s < n_states(), "GeneralizedGaussianPolicy: state out of range");
    return features_.row(s).dot(theta.values());
  }

  double log_density(const ParamVector& theta, int s, double a) const {
    return -std::pow(std::abs(a - mean(theta, s)), kappa_) - log_norm_;
  }

  double density(const ParamVector& theta, int s, double a) const { return std::exp(log_density(theta, s, a)); }

  ScoreEval score_eval(const ParamVector& theta, int s, double a) const {
    const double x = a - mean(theta, s);
    const Vector f = features_.row(s).transpose();
    if (x == 0.0) {
      // |x|^kappa has a kink at 0 when kappa < 2; take the zero subgradient.
      return {Vector::Zero(dim()), kappa_ < 2.0};
    }
    const double g = kappa_ * std::pow(std::abs(x), kappa_ - 1.0) * (x > 0.0 ? 1.0 : -1.0);
    return {g * f, false};
  }

  Vector score(const ParamVector& theta, int s, double a) const { return score_eval(theta, s, a).value; }

  // |X| = G^{1/kappa} with G ~ Gamma(1/kappa, 1), symmetric sign, shifted by mu.
  double sample_action(const ParamVector& theta, int s, Rng& rng) const {
    const double mu = mean(theta, s);
    std::gamma_distribution<double> gamma(1.0 / kappa_, 1.0);
    const double magnitude = std::pow(gamma(rng), 1.0 / kappa_);
    return uniform01(rng) < 0.5 ? mu - magnitude : mu + magnitude;
  }

  // Probability of [lo, hi] by quadrature; either end may be infinite.
  double region_probability(const ParamVector& theta, int s, double lo, double hi) const {
    require(lo <= hi, "region_probability: empty interval");
    const double mu = mean(theta, s);
    auto f = [this, mu](double a) { return std::exp(-std::pow(std::abs(a - mu), kappa_) - log_norm_); };
    return std::clamp(integrate_piecewise(f, lo, hi, {mu}), 0.0, 1.0);
  }

  // KL(pi_theta1 || pi_theta2) = E_1|a - mu2|^kappa - E_1|a - mu1|^kappa, and the
  // second term is exactly 1/kappa. Integrating the positive first term avoids
  // the cancellation in the pointwise difference.
  double kl_divergence(const ParamVector& theta1, const ParamVector& theta2, int s) const {
    const double delta = std::abs(mean(theta2, s) - mean(theta1, s));
    if (delta == 0.0) return 0.0;
    auto f = [this, delta](double x) {
      const double p = std::exp(-std::pow(std::abs(x), kappa_) - log_norm_);
      // Far in the tails the power overflows; the density is already zero there.
      return p == 0.0 ? 0.0 : p * std::pow(std::abs(x - delta), kappa_);
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double moment = integrate(f, -inf, 0.0) + integrate(f, 0.0, delta) + integrate(f, delta, inf);
    return std::max(moment - 1.0 / kappa_, 0.0);
  }

  SmoothnessSpec smoothness() const { return SmoothnessSpec(2.0, kappa_ - 1.0); }

 private:
  double kappa_;
  Matrix features_;
  double log_norm_;
};

}  // namespace hpg
