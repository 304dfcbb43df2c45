#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hpg/env.hpp"
#include "hpg/estimators.hpp"
#include "hpg/oracle.hpp"
#include "hpg/policy/policy.hpp"
#include "hpg/random.hpp"
#include "hpg/types.hpp"

namespace hpg {

enum class ScheduleKind { constant, horizon_scaled, decaying };

// Learning rates: h_t = lambda; lambda T^{(beta0-1)/(beta0+1)}; lambda t^{-q}.
struct RateSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double lambda = 0.1;
  double q = 0.0;
  double beta0 = 1.0;

  static RateSchedule constant(double lambda) { return checked({ScheduleKind::constant, lambda, 0.0, 1.0}); }
  static RateSchedule horizon_scaled(double lambda, double beta0) {
    return checked({ScheduleKind::horizon_scaled, lambda, 0.0, beta0});
  }
  static RateSchedule decaying(double lambda, double q) { return checked({ScheduleKind::decaying, lambda, q, 1.0}); }

  void validate() const {
    require(std::isfinite(lambda) && lambda > 0.0, "schedule: lambda must be positive");
    if (kind == ScheduleKind::decaying) require(q >= 0.0 && q < 1.0, "schedule: q must lie in [0,1)");
    if (kind == ScheduleKind::horizon_scaled) require(beta0 > 0.0 && beta0 <= 1.0, "schedule: beta0 must lie in (0,1]");
  }

 private:
  static RateSchedule checked(RateSchedule s) {
    s.validate();
    return s;
  }
};

inline double schedule_rate(const RateSchedule& schedule, std::int64_t t, std::int64_t total) {
  schedule.validate();
  require(t >= 1 && t <= total, "schedule_rate: need 1 <= t <= T");
  switch (schedule.kind) {
    case ScheduleKind::constant:
      return schedule.lambda;
    case ScheduleKind::horizon_scaled:
      return schedule.lambda *
             std::pow(static_cast<double>(total), (schedule.beta0 - 1.0) / (schedule.beta0 + 1.0));
    case ScheduleKind::decaying:
      return schedule.lambda * std::pow(static_cast<double>(t), -schedule.q);
  }
  throw ValidationError("schedule_rate: unknown schedule kind");
}

inline ParamVector checked_update(const ParamVector& theta, const Vector& direction, double h, const char* who) {
  require(direction.size() == theta.dim(), std::string(who) + ": dimension mismatch");
  Vector next = theta.values() + h * direction;
  if (!next.allFinite()) throw DivergenceError(std::string(who) + ": non-finite parameter after update");
  return ParamVector(std::move(next));
}

// theta + h * grad.mean (grad.mean already carries the 1/B).
inline ParamVector pg_step(const ParamVector& theta, const GradEstimate& grad, double h) {
  return checked_update(theta, grad.mean, h, "pg_step");
}

// theta + h * (K_t + xi I)^{-1} grad.mean
inline ParamVector npg_step(const ParamVector& theta, const GradEstimate& grad, const FisherEstimate& fisher, double h) {
  require(fisher.matrix.rows() == theta.dim(), "npg_step: Fisher matrix has wrong dimension");
  return checked_update(theta, ridge_solve(fisher.matrix, fisher.xi, grad.mean), h, "npg_step");
}

enum class Algo { pg, npg };

struct RunConfig {
  Algo algo = Algo::pg;
  int iterations = 100;  // T
  int batch = 100;       // B
  double gamma = 0.9;
  RateSchedule schedule;
  double xi = 0.1;
  std::uint64_t seed = 0;
  bool oracle_tracking = false;
  bool record_theta = false;
  BatchOptions batch_options;

  void validate() const {
    require(iterations >= 1, "T must be >= 1");
    require(batch >= 1, "B must be >= 1");
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
    if (algo == Algo::npg) require(xi > 0.0 && xi <= 1.0, "xi must lie in (0,1]");
    schedule.validate();
  }
};

struct RunRecord {
  int t = 0;
  double h = 0.0;
  double grad_norm_est = 0.0;
  std::optional<double> grad_norm_exact;  // ||grad J(theta_t)||
  std::optional<double> j_exact;          // J(theta_t)
  double reward_mean = 0.0;
  std::optional<Vector> theta;
};

struct RunLog {
  std::vector<RunRecord> records;
  ParamVector final_theta;
  bool diverged = false;
  std::string message;
};

// T iterations of minibatch PG or ridge-stabilized NPG. Deterministic in config.seed.
// A non-finite parameter ends the run with a partial log and diverged = true.
template <Environment Env, Policy Pol>
RunLog run(const RunConfig& config, const Env& env, const Pol& policy, const ParamVector& theta0) {
  config.validate();
  require(theta0.dim() == policy.dim(), "run: theta0 has wrong dimension");
  constexpr bool kTabular = std::same_as<Env, TabularMdp> && DiscretePolicy<Pol>;
  if constexpr (!kTabular) {
    require(!config.oracle_tracking, "run: oracle_tracking needs a tabular MDP and a discrete policy");
  } else {
    require(!config.oracle_tracking || config.gamma == env.gamma(), "run: oracle_tracking needs gamma equal to the MDP's");
  }

  Rng rng = substream(config.seed, {0x72756eULL});
  RunLog log;
  log.records.reserve(config.iterations);
  ParamVector theta = theta0;
  for (int t = 1; t <= config.iterations; ++t) {
    RunRecord rec;
    rec.t = t;
    rec.h = schedule_rate(config.schedule, t, config.iterations);
    try {
      const GradEstimate grad = estimate_gradient(env, policy, theta, config.gamma, config.batch, rng, config.batch_options);
      rec.grad_norm_est = grad.mean.norm();
      rec.reward_mean = grad.mean_reward;
      if (config.algo == Algo::pg) {
        theta = pg_step(theta, grad, rec.h);
      } else {
        const FisherEstimate fisher =
            estimate_fisher(env, policy, theta, config.gamma, config.batch, rng, config.xi, config.batch_options);
        theta = npg_step(theta, grad, fisher, rec.h);
      }
    } catch (const DivergenceError& e) {
      log.diverged = true;
      log.message = "iteration " + std::to_string(t) + ": " + e.what();
      break;
    }
    if constexpr (kTabular) {
      if (config.oracle_tracking) {
        rec.grad_norm_exact = oracle::analytic_gradient(env, policy, theta).norm();
        rec.j_exact = oracle::objective(env, policy, theta);
      }
    }
    if (config.record_theta) rec.theta = theta.values();
    log.records.push_back(std::move(rec));
  }
  log.final_theta = theta;
  return log;
}

}  // namespace hpg
