#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "hpg/env.hpp"
#include "hpg/estimators.hpp"
#include "hpg/optimizers.hpp"
#include "hpg/oracle.hpp"
#include "hpg/policy/policy.hpp"
#include "hpg/types.hpp"

namespace hpg::diagnostics {

struct LineFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double slope_se = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "fit_line: size mismatch");
  LineFit fit;
  fit.n = x.size();
  if (fit.n < 2) return fit;
  const double n = static_cast<double>(fit.n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double sse = std::max(0.0, syy - fit.slope * sxy);
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_se = fit.n > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  return fit;
}

// Fit of log y against log x over the pairs with y > 0.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return fit_line(lx, ly);
}

// n values logarithmically spaced over [lo, hi].
inline std::vector<double> log_spaced(double lo, double hi, int n) {
  require(lo > 0.0 && hi > lo && n >= 2, "log_spaced: need 0 < lo < hi and n >= 2");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return out;
}

// Unit vectors e_1..e_N plus the normalized all-ones direction.
inline std::vector<Vector> default_directions(Eigen::Index n) {
  std::vector<Vector> dirs;
  for (Eigen::Index i = 0; i < n; ++i) dirs.push_back(Vector::Unit(n, i));
  if (n > 1) dirs.push_back(Vector::Ones(n) / std::sqrt(static_cast<double>(n)));
  return dirs;
}

struct SmoothnessReport {
  std::vector<double> radii;
  std::vector<double> kl_values;        // max over directions/states of KL(pi_theta || pi_{theta + eta})
  std::vector<double> score_sup_diffs;  // max over directions/points of ||psi_theta - psi_{theta + eta}||
  double fitted_beta1 = std::numeric_limits<double>::quiet_NaN();
  double fitted_beta2 = std::numeric_limits<double>::quiet_NaN();
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();
};

inline void check_radii(const std::vector<double>& radii) {
  require(!radii.empty(), "smoothness probe: no radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0, "smoothness probe: radii must be positive");
    if (i > 0) require(radii[i] > radii[i - 1], "smoothness probe: radii must be strictly increasing");
  }
}

template <KlPolicy Pol>
SmoothnessReport probe_kl_smoothness(const Pol& policy, const ParamVector& theta, const std::vector<Vector>& directions,
                                     const std::vector<double>& radii,
                                     const std::vector<typename Pol::state_type>& states) {
  check_radii(radii);
  require(!directions.empty() && !states.empty(), "probe_kl_smoothness: need directions and states");
  SmoothnessReport rep;
  rep.radii = radii;
  for (double r : radii) {
    double worst = 0.0;
    for (const Vector& u : directions) {
      const ParamVector moved = theta.shifted(u.normalized(), r);
      for (const auto& s : states) worst = std::max(worst, policy.kl_divergence(theta, moved, s));
    }
    rep.kl_values.push_back(worst);
  }
  const LineFit fit = fit_loglog(rep.radii, rep.kl_values);
  rep.fitted_beta1 = fit.slope;
  rep.fit_r2 = fit.r2;
  return rep;
}

// (state, action) points at which the score difference is evaluated.
template <class S, class A>
struct ProbePoint {
  S state;
  A action;
};

// Deterministic grid over [center - half_width, center + half_width] plus
// points at log-spaced offsets on both sides of the score kink at `center`.
inline std::vector<ProbePoint<int, double>> kink_probe_points(double center, double half_width = 5.0,
                                                              int grid = 201, double min_offset = 1e-6,
                                                              int per_decade = 40, int state = 0) {
  std::vector<ProbePoint<int, double>> pts;
  for (int i = 0; i < grid; ++i) {
    pts.push_back({state, center - half_width + 2.0 * half_width * i / (grid - 1)});
  }
  const int decades = static_cast<int>(std::ceil(std::log10(half_width / min_offset)));
  for (const double off : log_spaced(min_offset, half_width, decades * per_decade + 1)) {
    pts.push_back({state, center + off});
    pts.push_back({state, center - off});
  }
  return pts;
}

// The supremum over (s, a) is approximated by a max over the supplied points,
// so the result under-estimates the true sup.
template <Policy Pol>
SmoothnessReport probe_score_smoothness(
    const Pol& policy, const ParamVector& theta, const std::vector<Vector>& directions,
    const std::vector<double>& radii,
    const std::vector<ProbePoint<typename Pol::state_type, typename Pol::action_type>>& points) {
  check_radii(radii);
  require(!directions.empty() && !points.empty(), "probe_score_smoothness: need directions and points");
  SmoothnessReport rep;
  rep.radii = radii;
  std::vector<Vector> base;
  base.reserve(points.size());
  for (const auto& p : points) base.push_back(policy.score(theta, p.state, p.action));
  for (double r : radii) {
    double worst = 0.0;
    for (const Vector& u : directions) {
      const ParamVector moved = theta.shifted(u.normalized(), r);
      for (std::size_t i = 0; i < points.size(); ++i) {
        worst = std::max(worst, (policy.score(moved, points[i].state, points[i].action) - base[i]).norm());
      }
    }
    rep.score_sup_diffs.push_back(worst);
  }
  const LineFit fit = fit_loglog(rep.radii, rep.score_sup_diffs);
  rep.fitted_beta2 = fit.slope;
  rep.fit_r2 = fit.r2;
  return rep;
}

struct MomentReport {
  std::vector<std::int64_t> sample_counts;
  std::vector<double> running_l2;     // (1/N) sum ||psi_n||^2
  std::vector<double> running_l2_se;  // standard error of running_l2
  std::vector<double> running_max;    // max_{n <= N} ||psi_n||
};

// Streams n_max visitation draws and records both statistics at each checkpoint.
template <Environment Env, Policy Pol>
MomentReport probe_moments(const Pol& policy, const ParamVector& theta, const Env& env, std::int64_t n_max,
                           std::vector<std::int64_t> checkpoints, Rng& rng, double gamma = 0.0) {
  require(n_max >= 1, "probe_moments: n_max must be >= 1");
  std::sort(checkpoints.begin(), checkpoints.end());
  require(!checkpoints.empty() && checkpoints.front() >= 1 && checkpoints.back() <= n_max,
          "probe_moments: checkpoints must lie in [1, n_max]");
  MomentReport rep;
  double sum = 0.0, sum_sq = 0.0, best = 0.0;
  std::size_t next = 0;
  for (std::int64_t n = 1; n <= n_max && next < checkpoints.size(); ++n) {
    const auto draw = sample_visitation(env, policy, theta, gamma, rng);
    const double sq = policy.score(theta, draw.state, draw.action).squaredNorm();
    sum += sq;
    sum_sq += sq * sq;
    best = std::max(best, std::sqrt(sq));
    while (next < checkpoints.size() && checkpoints[next] == n) {
      const double nn = static_cast<double>(n);
      const double mean = sum / nn;
      const double var = n > 1 ? std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
      rep.sample_counts.push_back(n);
      rep.running_l2.push_back(mean);
      rep.running_l2_se.push_back(std::sqrt(var / nn));
      rep.running_max.push_back(best);
      ++next;
    }
  }
  return rep;
}

struct TailScan {
  std::vector<double> coordinate;  // scanned parameter coordinate
  std::vector<double> curve_a;     // mean ||psi_theta - psi_ref|| under policy a
  std::vector<double> curve_b;
};

// For each theta in the grid: mean over n_actions actions drawn at theta_ref of
// ||psi_theta(s, a) - psi_ref(s, a)||, for both policies.
template <Policy PolA, Policy PolB>
TailScan probe_tail_scan(const PolA& policy_a, const PolB& policy_b, const ParamVector& theta_ref,
                         Eigen::Index coordinate, const std::vector<double>& values,
                         const typename PolA::state_type& state, int n_actions, Rng& rng) {
  require(n_actions >= 1, "probe_tail_scan: need at least one action");
  require(coordinate >= 0 && coordinate < theta_ref.dim(), "probe_tail_scan: coordinate out of range");
  auto curve = [&](const auto& policy, std::vector<double>& out) {
    std::vector<typename std::decay_t<decltype(policy)>::action_type> actions;
    std::vector<Vector> ref;
    for (int i = 0; i < n_actions; ++i) {
      actions.push_back(policy.sample_action(theta_ref, state, rng));
      ref.push_back(policy.score(theta_ref, state, actions.back()));
    }
    for (double x : values) {
      Vector moved = theta_ref.values();
      moved[coordinate] = x;
      const ParamVector theta(moved);
      double total = 0.0;
      for (int i = 0; i < n_actions; ++i) total += (policy.score(theta, state, actions[i]) - ref[i]).norm();
      out.push_back(total / n_actions);
    }
  };
  TailScan scan;
  scan.coordinate = values;
  curve(policy_a, scan.curve_a);
  curve(policy_b, scan.curve_b);
  return scan;
}

struct ErgodicityReport {
  std::vector<int> steps;
  std::vector<double> tv_to_limit;
  double fitted_log_decay = std::numeric_limits<double>::quiet_NaN();  // ~ log delta
  double fitted_c0 = std::numeric_limits<double>::quiet_NaN();
  bool non_decaying = false;  // reducible or periodic behaviour
  double bin_width = 1.0;     // states are discrete ids
  double noise_floor = 0.0;   // TV values at or below this are left out of the fit
};

inline double total_variation(const Vector& p, const Vector& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

namespace detail {
inline void finish_ergodicity_fit(ErgodicityReport& rep) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < rep.steps.size(); ++i) {
    if (rep.tv_to_limit[i] > rep.noise_floor) {
      x.push_back(rep.steps[i]);
      y.push_back(std::log(rep.tv_to_limit[i]));
    }
  }
  const LineFit fit = fit_line(x, y);
  rep.fitted_log_decay = fit.slope;
  rep.fitted_c0 = std::exp(fit.intercept);
  const double peak = *std::max_element(rep.tv_to_limit.begin(), rep.tv_to_limit.end());
  rep.non_decaying = peak > rep.noise_floor && rep.tv_to_limit.back() >= 0.9 * peak && rep.steps.back() > 0;
}
}  // namespace detail

// Exact n-step laws rho^T P_pi^n against the invariant law of P_pi.
template <DiscretePolicy Pol>
ErgodicityReport probe_ergodicity(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta, int n_max) {
  require(n_max >= 1, "probe_ergodicity: n_max must be >= 1");
  const Matrix p = oracle::state_transition(mdp, oracle::policy_matrix(mdp, policy, theta));
  const Vector limit = oracle::stationary_distribution(p);
  ErgodicityReport rep;
  rep.noise_floor = 1e-13;
  Vector law = mdp.init_dist();
  for (int n = 0; n <= n_max; ++n) {
    rep.steps.push_back(n);
    rep.tv_to_limit.push_back(std::clamp(total_variation(law, limit), 0.0, 1.0));
    law = (law.transpose() * p).transpose();
  }
  detail::finish_ergodicity_fit(rep);
  return rep;
}

// Empirical version: histogram of s_n over `trials` independent rollouts.
// The limit law is the histogram at n_max; TV below 3 sqrt(|S| / trials) is noise.
template <Environment Env, Policy Pol>
ErgodicityReport probe_ergodicity_sampled(const Env& env, const Pol& policy, const ParamVector& theta, int n_states,
                                          int n_max, int trials, Rng& rng) {
  require(n_max >= 1 && trials >= 1 && n_states >= 1, "probe_ergodicity_sampled: bad arguments");
  Matrix counts = Matrix::Zero(n_max + 1, n_states);
  for (int k = 0; k < trials; ++k) {
    auto s = env.initial_state(rng);
    for (int n = 0; n <= n_max; ++n) {
      counts(n, s) += 1.0;
      if (n == n_max) break;
      s = env.step(s, policy.sample_action(theta, s, rng), rng).next;
    }
  }
  counts /= static_cast<double>(trials);
  const Vector limit = counts.row(n_max).transpose();
  ErgodicityReport rep;
  rep.noise_floor = 3.0 * std::sqrt(static_cast<double>(n_states) / trials);
  for (int n = 0; n <= n_max; ++n) {
    rep.steps.push_back(n);
    rep.tv_to_limit.push_back(total_variation(counts.row(n).transpose(), limit));
  }
  detail::finish_ergodicity_fit(rep);
  return rep;
}

// Modulus of the second-largest eigenvalue of a stochastic matrix.
inline double second_eigenvalue_modulus(const Matrix& p) {
  Eigen::EigenSolver<Matrix> es(p, false);
  std::vector<double> mods;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(mods.rbegin(), mods.rend());
  return mods.size() > 1 ? mods[1] : 0.0;
}

struct NoiseReport {
  int batch = 0;
  int repeats = 0;
  double mean_sq_error = 0.0;  // empirical E||e_t||^2
  double mean_sq_error_se = 0.0;
  double psi_infty = 0.0;      // exact E_d ||psi||^2
  double sigma = 0.0;          // 3 alpha sqrt(psi_infty)
  double bound = 0.0;          // sigma^2 / ((1 - gamma)^2 B)
};

// e_t is the estimator minus its exact expectation E_d[Q psi].
template <DiscretePolicy Pol>
NoiseReport probe_grad_noise(const TabularMdp& env, const Pol& policy, const ParamVector& theta, double gamma, int batch,
                             int repeats, Rng& rng, const BatchOptions& opts = {}) {
  require(repeats >= 2, "probe_grad_noise: need at least 2 repeats");
  require(std::abs(gamma - env.gamma()) < 1e-15, "probe_grad_noise: gamma must match the MDP");
  const Vector target = oracle::estimator_target(env, policy, theta);
  NoiseReport rep;
  rep.batch = batch;
  rep.repeats = repeats;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < repeats; ++k) {
    const double e2 = (estimate_gradient(env, policy, theta, gamma, batch, rng, opts).mean - target).squaredNorm();
    sum += e2;
    sum_sq += e2 * e2;
  }
  const double n = repeats;
  rep.mean_sq_error = sum / n;
  rep.mean_sq_error_se = std::sqrt(std::max(0.0, (sum_sq - n * rep.mean_sq_error * rep.mean_sq_error) / (n - 1.0)) / n);
  rep.psi_infty = oracle::exact_psi_infty(env, policy, theta);
  rep.sigma = 3.0 * env.alpha() * std::sqrt(rep.psi_infty);
  rep.bound = rep.sigma * rep.sigma / ((1.0 - gamma) * (1.0 - gamma) * batch);
  return rep;
}

struct DominationReport {
  std::vector<double> ratios;         // NaN where the point is excluded or violating
  std::vector<std::size_t> violations;  // inner product <= 0 while J(theta*) > J(theta)
  std::size_t excluded = 0;           // theta = theta* or zero gap
  double empirical_m = std::numeric_limits<double>::quiet_NaN();  // max finite ratio
};

// Ratio (J(theta*) - J(theta)) (1 - gamma) / <theta* - theta, grad J(theta)> per grid point.
template <DiscretePolicy Pol>
DominationReport probe_domination(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta_star,
                                  const std::vector<ParamVector>& grid) {
  const double j_star = oracle::objective(mdp, policy, theta_star);
  DominationReport rep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ParamVector& theta = grid[i];
    const double gap = j_star - oracle::objective(mdp, policy, theta);
    const double inner = (theta_star.values() - theta.values()).dot(oracle::analytic_gradient(mdp, policy, theta));
    double ratio = std::numeric_limits<double>::quiet_NaN();
    if (theta == theta_star || (gap == 0.0 && inner == 0.0)) {
      ++rep.excluded;
    } else if (inner <= 0.0) {
      rep.violations.push_back(i);
    } else {
      ratio = gap * (1.0 - mdp.gamma()) / inner;
      if (std::isnan(rep.empirical_m) || ratio > rep.empirical_m) rep.empirical_m = ratio;
    }
    rep.ratios.push_back(ratio);
  }
  return rep;
}

struct RateFit {
  double slope = 0.0;
  double slope_se = 0.0;
  std::size_t points = 0;
};

// OLS of log((1/T') sum_{t <= T'} g_t) against log T' for T' in [t_lo, t_hi],
// where g_t are squared exact gradient norms indexed from t = 1.
inline RateFit fit_rate(const std::vector<double>& sq_grad_norms, int t_lo, int t_hi) {
  require(t_lo >= 1 && t_hi <= static_cast<int>(sq_grad_norms.size()) && t_lo <= t_hi,
          "fit_rate: window outside the run");
  require(t_hi - t_lo + 1 >= 5, "fit_rate: window too short (need at least 5 points)");
  std::vector<double> x, y;
  double running = 0.0;
  for (int t = 1; t <= t_hi; ++t) {
    running += sq_grad_norms[t - 1];
    if (t >= t_lo) {
      x.push_back(std::log(static_cast<double>(t)));
      y.push_back(std::log(running / t));
    }
  }
  const LineFit fit = fit_line(x, y);
  return {fit.slope, fit.slope_se, fit.n};
}

inline RateFit fit_rate(const RunLog& log, int t_lo, int t_hi) {
  std::vector<double> g;
  g.reserve(log.records.size());
  for (const auto& rec : log.records) {
    require(rec.grad_norm_exact.has_value(), "fit_rate: run was not oracle-tracked");
    g.push_back(*rec.grad_norm_exact * *rec.grad_norm_exact);
  }
  return fit_rate(g, t_lo, t_hi);
}

}  // namespace hpg::diagnostics
