#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "hpg/policy/policy.hpp"
#include "hpg/quadrature.hpp"

namespace hpg {

// nu_theta(a) = -theta log ||a - phi_star|| with actions (= features) in the
// closed unit ball of R^d, d in {1, 2}, scalar theta in [-1, 1].
//
// The score -log||a - phi_star|| + E_theta[log||a' - phi_star||] is unbounded
// near phi_star yet square-integrable under the policy.
class SafeLogBarrierPolicy {
 public:
  using state_type = int;
  using action_type = Vector;

  SafeLogBarrierPolicy(int action_dim, Vector phi_star)
      : dim_(action_dim), phi_star_(std::move(phi_star)), cache_(std::make_shared<Cache>()) {
    require(dim_ == 1 || dim_ == 2, "SafeLogBarrierPolicy: action dimension must be 1 or 2");
    require(phi_star_.size() == dim_, "SafeLogBarrierPolicy: phi_star has wrong dimension");
    require(phi_star_.allFinite() && phi_star_.norm() <= 1.0, "SafeLogBarrierPolicy: ||phi_star|| must be <= 1");
  }

  Eigen::Index dim() const { return 1; }
  int action_dim() const { return dim_; }
  const Vector& phi_star() const { return phi_star_; }

  struct Moments {
    double normalizer;  // Z(theta) = int_ball ||a - phi_star||^{-theta} da
    double mean_log;    // E_theta[log ||a - phi_star||]
  };

  // Computed once per theta value and cached; safe to call from several threads.
  Moments moments(const ParamVector& theta) const {
    const double t = check_theta(theta);
    {
      std::lock_guard<std::mutex> lock(cache_->mutex);
      auto it = cache_->values.find(t);
      if (it != cache_->values.end()) return it->second;
    }
    const Moments m = compute_moments(t);
    std::lock_guard<std::mutex> lock(cache_->mutex);
    return cache_->values.emplace(t, m).first->second;
  }

  double log_density(const ParamVector& theta, int, const Vector& a) const {
    check_action(a);
    const Moments m = moments(theta);
    return -theta[0] * std::log((a - phi_star_).norm()) - std::log(m.normalizer);
  }

  ScoreEval score_eval(const ParamVector& theta, int, const Vector& a) const {
    check_action(a);
    const double r = (a - phi_star_).norm();
    if (r == 0.0) return {Vector::Zero(1), true};
    return {Vector::Constant(1, -std::log(r) + moments(theta).mean_log), false};
  }

  Vector score(const ParamVector& theta, int s, const Vector& a) const { return score_eval(theta, s, a).value; }

  // Polar proposal around phi_star over the ball of radius 1 + ||phi_star||,
  // radial CDF r^{d - theta}; rejected when it falls outside the unit ball.
  Vector sample_action(const ParamVector& theta, int, Rng& rng) const {
    const double t = check_theta(theta);
    const double reach = 1.0 + phi_star_.norm();
    const double expo = 1.0 / (dim_ - t);
    Vector a(dim_);
    while (true) {
      const double r = reach * std::pow(1.0 - uniform01(rng), expo);
      if (dim_ == 1) {
        a[0] = phi_star_[0] + (uniform01(rng) < 0.5 ? -r : r);
      } else {
        const double w = 2.0 * std::numbers::pi * uniform01(rng);
        a[0] = phi_star_[0] + r * std::cos(w);
        a[1] = phi_star_[1] + r * std::sin(w);
      }
      if (a.squaredNorm() <= 1.0) return a;
    }
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<double, Moments> values;
  };

  double check_theta(const ParamVector& theta) const {
    require(theta.dim() == 1, "SafeLogBarrierPolicy: theta must be scalar");
    const double t = theta[0];
    require(t >= -1.0 && t <= 1.0, "SafeLogBarrierPolicy: theta must lie in [-1,1]");
    if (t >= dim_) {
      throw QuadratureError("SafeLogBarrierPolicy: normalizer diverges for theta = " + std::to_string(t) +
                            " in dimension " + std::to_string(dim_));
    }
    return t;
  }

  void check_action(const Vector& a) const {
    require(a.size() == dim_, "SafeLogBarrierPolicy: action has wrong dimension");
    require(a.squaredNorm() <= 1.0 + 1e-12, "SafeLogBarrierPolicy: action outside the unit ball");
  }

  // In polar coordinates about phi_star, with R(u) the distance to the unit
  // sphere along direction u and m = d - theta:
  //   int_0^R r^{m-1} dr       = R^m / m
  //   int_0^R r^{m-1} log r dr = R^m (log R / m - 1 / m^2)
  // The angular integral (d = 2) is done by adaptive quadrature.
  Moments compute_moments(double t) const {
    const double m = dim_ - t;
    auto radial = [m](double reach) {
      if (reach <= 0.0) return std::pair{0.0, 0.0};
      const double rm = std::pow(reach, m);
      return std::pair{rm / m, rm * (std::log(reach) / m - 1.0 / (m * m))};
    };
    auto reach_along = [this](double ux, double uy) {
      const double b = phi_star_[0] * ux + (dim_ == 2 ? phi_star_[1] * uy : 0.0);
      const double c = phi_star_.squaredNorm() - 1.0;
      return -b + std::sqrt(b * b - c);
    };
    double z = 0.0;
    double zlog = 0.0;
    if (dim_ == 1) {
      for (double u : {-1.0, 1.0}) {
        const auto [a, b] = radial(reach_along(u, 0.0));
        z += a;
        zlog += b;
      }
    } else {
      const double two_pi = 2.0 * std::numbers::pi;
      z = integrate([&](double w) { return radial(reach_along(std::cos(w), std::sin(w))).first; }, 0.0, two_pi);
      zlog = integrate([&](double w) { return radial(reach_along(std::cos(w), std::sin(w))).second; }, 0.0, two_pi);
    }
    if (!(std::isfinite(z) && z > 0.0)) throw QuadratureError("SafeLogBarrierPolicy: non-finite normalizer");
    return {z, zlog / z};
  }

  int dim_;
  Vector phi_star_;
  std::shared_ptr<Cache> cache_;
};

}  // namespace hpg
