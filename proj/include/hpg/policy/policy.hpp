#pragma once

#include <algorithm>
#include <concepts>
#include <string>

#include "hpg/random.hpp"
#include "hpg/types.hpp"

namespace hpg {

// pi_theta(a|s) proportional to exp(nu_theta(s, a)).
template <class P>
concept Policy = requires(const P& p, const ParamVector& theta, const typename P::state_type& s,
                          const typename P::action_type& a, Rng& rng) {
  { p.dim() } -> std::convertible_to<Eigen::Index>;
  { p.log_density(theta, s, a) } -> std::convertible_to<double>;
  { p.score(theta, s, a) } -> std::convertible_to<Vector>;
  { p.sample_action(theta, s, rng) } -> std::same_as<typename P::action_type>;
};

// Finite action sets: the oracle layer needs the full conditional law.
template <class P>
concept DiscretePolicy = Policy<P> && requires(const P& p, const ParamVector& theta, int s) {
  { p.n_actions() } -> std::convertible_to<int>;
  { p.probabilities(theta, s) } -> std::convertible_to<Vector>;
};

// Policies with a computable KL(pi_theta(.|s) || pi_theta2(.|s)).
template <class P>
concept KlPolicy = Policy<P> && requires(const P& p, const ParamVector& t1, const ParamVector& t2,
                                         const typename P::state_type& s) {
  { p.kl_divergence(t1, t2, s) } -> std::convertible_to<double>;
};

// Score together with a flag raised at non-differentiable points, where the
// symmetric subgradient (zero) is returned instead.
struct ScoreEval {
  Vector value;
  bool nondifferentiable = false;
};

// Hoelder exponents of a policy class: KL order beta1, score order beta2.
class SmoothnessSpec {
 public:
  SmoothnessSpec(double beta1, double beta2, double c_nu1 = 0.0, double c_nu2 = 0.0)
      : beta1_(beta1), beta2_(beta2), c_nu1_(c_nu1), c_nu2_(c_nu2) {
    require(beta1 >= 1.0 && beta1 <= 2.0, "SmoothnessSpec: beta1 must lie in [1,2]");
    require(beta2 > 0.0 && beta2 <= 1.0, "SmoothnessSpec: beta2 must lie in (0,1]");
    require(c_nu1 >= 0.0 && c_nu2 >= 0.0, "SmoothnessSpec: constants must be nonnegative");
  }

  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double c_nu1() const { return c_nu1_; }
  double c_nu2() const { return c_nu2_; }
  // Dominant order of smoothness.
  double beta0() const { return std::min(beta1_ / 4.0, beta2_); }
  double beta_max() const { return std::max(beta1_ / 4.0, beta2_); }

 private:
  double beta1_, beta2_, c_nu1_, c_nu2_;
};

}  // namespace hpg
