#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hpg/cli/config.hpp"
#include "hpg/cli/manifest.hpp"
#include "hpg/diagnostics.hpp"
#include "hpg/io/csv.hpp"
#include "hpg/io/tabular_file.hpp"
#include "hpg/oracle.hpp"
#include "hpg/optimizers.hpp"
#include "hpg/policy.hpp"
#include "hpg/problems.hpp"

namespace hpg::cli {

enum ExitCode { kSuccess = 0, kValidation = 1, kDivergence = 2, kCheckFailed = 3 };

struct Outcome {
  int exit_code = kSuccess;
  std::string status = "ok";
  std::string message;
  bool diverged = false;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception is rethrown.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// Distinct integers, log-spaced over [1, n_max], always including n_max.
inline std::vector<std::int64_t> log_checkpoints(std::int64_t n_max, int per_decade) {
  std::vector<std::int64_t> out;
  const double decades = std::log10(static_cast<double>(n_max));
  const int steps = std::max(1, static_cast<int>(std::ceil(decades * per_decade)));
  for (int i = 0; i <= steps; ++i) {
    const auto n = static_cast<std::int64_t>(std::llround(std::pow(10.0, decades * i / steps)));
    if (out.empty() || n > out.back()) out.push_back(std::clamp<std::int64_t>(n, 1, n_max));
  }
  if (out.back() != n_max) out.push_back(n_max);
  return out;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

inline TabularMdp with_gamma(const TabularMdp& mdp, double gamma) {
  auto doc = io::tabular_to_json(mdp);
  doc["gamma"] = gamma;
  return io::tabular_from_json(doc);
}

inline TabularMdp load_tabular_env(const ExperimentConfig& c) {
  TabularMdp mdp = c.env.file ? io::load_tabular(*c.env.file) : problems::builtin(c.env.builtin);
  return c.gamma_given ? with_gamma(mdp, c.run.gamma) : mdp;
}

inline ParamVector resolve_theta(const std::vector<double>& given, Eigen::Index dim, const std::string& key,
                                 const Vector& fallback) {
  if (given.empty()) return ParamVector(fallback);
  require(static_cast<Eigen::Index>(given.size()) == dim,
          key + ": needs " + std::to_string(dim) + " entries for this policy");
  return ParamVector(Eigen::Map<const Vector>(given.data(), dim));
}

// Builds the configured (env, policy) pair and calls fn(env, policy).
template <class Fn>
void with_problem(const ExperimentConfig& c, Fn&& fn) {
  switch (c.env.kind) {
    case EnvKind::tabular: {
      const TabularMdp mdp = load_tabular_env(c);
      fn(mdp, SoftmaxPolicy::tabular(mdp.n_states(), mdp.n_actions()));
      return;
    }
    case EnvKind::exploration_bandit:
      fn(ExplorationBandit(c.env.theta_star), GeneralizedGaussianPolicy::location(c.policy.kappa));
      return;
    case EnvKind::unit_ball: {
      Vector phi = Vector::Zero(c.policy.action_dim);
      for (std::size_t i = 0; i < c.policy.phi_star.size(); ++i) phi[static_cast<Eigen::Index>(i)] = c.policy.phi_star[i];
      fn(SingleStateEnv<Vector>(), SafeLogBarrierPolicy(c.policy.action_dim, phi));
      return;
    }
  }
}

inline std::string kappa_label(double kappa) { return "kappa_" + io::format_double(kappa); }

inline Outcome run_single(const ExperimentConfig& c, ArtifactWriter& out) {
  Outcome o;
  with_problem(c, [&](const auto& env, const auto& policy) {
    RunConfig rc = c.run;
    using Env = std::decay_t<decltype(env)>;
    if constexpr (std::same_as<Env, TabularMdp>) {
      rc.gamma = env.gamma();
    }
    const ParamVector theta0 = resolve_theta(c.theta0, policy.dim(), "run.theta0", Vector::Zero(policy.dim()));
    const RunLog log = run(rc, env, policy, theta0);
    out.write_csv("run.csv", io::runlog_table(log));
    if (log.diverged) {
      o = {kDivergence, "diverged", log.message, true};
    }
  });
  return o;
}

struct ExplorationTrial {
  RunLog log;
  std::optional<int> first_crossing;  // first t with mean batch reward above the threshold
};

inline ExplorationTrial exploration_trial(const ExplorationParams& p, double kappa, std::uint64_t seed) {
  RunConfig rc;
  rc.algo = p.algo;
  rc.iterations = p.iterations;
  rc.batch = p.batch;
  rc.gamma = 0.0;
  rc.schedule = RateSchedule::constant(p.lambda);
  rc.xi = p.xi;
  rc.seed = seed;
  ExplorationTrial trial;
  trial.log = run(rc, ExplorationBandit(p.theta_star), GeneralizedGaussianPolicy::location(kappa),
                  ParamVector::scalar(p.theta0));
  for (const auto& r : trial.log.records)
    if (r.reward_mean > p.threshold) {
      trial.first_crossing = r.t;
      break;
    }
  return trial;
}

// Seed k of a multi-seed experiment runs with seed base + k.
inline Outcome run_exploration(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.exploration;
  Outcome o;
  io::CsvTable summary({"kappa", "seed", "first_t_above_threshold", "region_probability"});
  for (double kappa : p.kappas) {
    std::vector<ExplorationTrial> trials(p.seeds);
    parallel_for(p.seeds, c.threads, [&](int k) { trials[k] = exploration_trial(p, kappa, c.seed + k); });

    std::vector<std::string> header = {"t"};
    for (int k = 0; k < p.seeds; ++k) header.push_back("seed_" + std::to_string(c.seed + k));
    io::CsvTable curves(header);
    for (int t = 1; t <= p.iterations; ++t) {
      std::vector<std::string> row = {std::to_string(t)};
      for (const auto& tr : trials) {
        row.push_back(t <= static_cast<int>(tr.log.records.size()) ? io::format_double(tr.log.records[t - 1].reward_mean)
                                                                   : std::string());
      }
      curves.push(std::move(row));
    }
    out.write_csv("exploration_" + kappa_label(kappa) + ".csv", curves);

    const double region = GeneralizedGaussianPolicy::location(kappa).region_probability(
        ParamVector::scalar(p.theta0), 0, p.theta_star - p.region_halfwidth, p.theta_star + p.region_halfwidth);
    for (int k = 0; k < p.seeds; ++k) {
      summary.row(kappa, c.seed + k, trials[k].first_crossing, region);
      if (trials[k].log.diverged && !o.diverged)
        o = {kDivergence, "diverged", kappa_label(kappa) + " seed " + std::to_string(c.seed + k) + ": " +
                                          trials[k].log.message, true};
    }
  }
  out.write_csv("exploration_summary.csv", summary);
  return o;
}

inline Outcome run_tail_scan(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.tail_scan;
  Rng rng = substream(c.seed, {0x7461696cULL});
  const auto scan = diagnostics::probe_tail_scan(GeneralizedGaussianPolicy::location(p.kappa_a),
                                                 GeneralizedGaussianPolicy::location(p.kappa_b), ParamVector::zeros(1),
                                                 0, linspace(p.lo, p.hi, p.points), 0, p.n_actions, rng);
  io::CsvTable table({"theta", "score_gap_" + kappa_label(p.kappa_a), "score_gap_" + kappa_label(p.kappa_b)});
  for (std::size_t i = 0; i < scan.coordinate.size(); ++i)
    table.row(scan.coordinate[i], scan.curve_a[i], scan.curve_b[i]);
  out.write_csv("tail_scan.csv", table);
  return {};
}

inline Outcome run_moment_probe(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.moment_probe;
  with_problem(c, [&](const auto& env, const auto& policy) {
    using Env = std::decay_t<decltype(env)>;
    Vector fallback = Vector::Zero(policy.dim());
    if constexpr (std::same_as<std::decay_t<decltype(policy)>, SafeLogBarrierPolicy>) fallback[0] = -0.5;
    double gamma = p.gamma;
    if constexpr (std::same_as<Env, TabularMdp>) gamma = env.gamma();
    const ParamVector theta = resolve_theta(p.theta, policy.dim(), "moment_probe.theta", fallback);
    Rng rng = substream(c.seed, {0x6d6f6dULL});
    const auto rep = diagnostics::probe_moments(policy, theta, env, p.n_max, log_checkpoints(p.n_max, p.per_decade),
                                                rng, gamma);
    io::CsvTable table({"N", "running_l2", "running_l2_se", "running_max"});
    for (std::size_t i = 0; i < rep.sample_counts.size(); ++i)
      table.row(rep.sample_counts[i], rep.running_l2[i], rep.running_l2_se[i], rep.running_max[i]);
    out.write_csv("moment_probe.csv", table);
  });
  return {};
}

inline Outcome run_smoothness_probe(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.smoothness_probe;
  const auto radii = diagnostics::log_spaced(p.radius_min, p.radius_max, p.n_radii);
  auto emit = [&](const diagnostics::SmoothnessReport& kl, const diagnostics::SmoothnessReport& score,
                  const SmoothnessSpec& declared) {
    io::CsvTable table({"radius", "kl", "score_sup_diff"});
    for (std::size_t i = 0; i < radii.size(); ++i) table.row(radii[i], kl.kl_values[i], score.score_sup_diffs[i]);
    out.write_csv("smoothness_probe.csv", table);
    io::CsvTable fit({"quantity", "fitted_exponent", "r2", "declared_exponent"});
    fit.row(std::string("beta1"), kl.fitted_beta1, kl.fit_r2, declared.beta1());
    fit.row(std::string("beta2"), score.fitted_beta2, score.fit_r2, declared.beta2());
    out.write_csv("smoothness_fit.csv", fit);
  };
  with_problem(c, [&](const auto&, const auto& policy) {
    using Pol = std::decay_t<decltype(policy)>;
    const ParamVector theta =
        resolve_theta(p.theta, policy.dim(), "smoothness_probe.theta", Vector::Zero(policy.dim()));
    const auto dirs = diagnostics::default_directions(policy.dim());
    if constexpr (std::same_as<Pol, SoftmaxPolicy>) {
      std::vector<int> states;
      std::vector<diagnostics::ProbePoint<int, int>> points;
      for (int s = 0; s < policy.n_states(); ++s) {
        states.push_back(s);
        for (int a = 0; a < policy.n_actions(); ++a) points.push_back({s, a});
      }
      emit(diagnostics::probe_kl_smoothness(policy, theta, dirs, radii, states),
           diagnostics::probe_score_smoothness(policy, theta, dirs, radii, points), policy.smoothness());
    } else if constexpr (std::same_as<Pol, GeneralizedGaussianPolicy>) {
      emit(diagnostics::probe_kl_smoothness(policy, theta, dirs, radii, std::vector<int>{0}),
           diagnostics::probe_score_smoothness(policy, theta, dirs, radii,
                                               diagnostics::kink_probe_points(policy.mean(theta, 0))),
           policy.smoothness());
    } else {
      throw ValidationError("smoothness_probe: unsupported policy");
    }
  });
  return {};
}

inline Outcome run_ergodicity_probe(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.ergodicity_probe;
  const TabularMdp mdp = load_tabular_env(c);
  const auto policy = SoftmaxPolicy::tabular(mdp.n_states(), mdp.n_actions());
  const ParamVector theta =
      resolve_theta(p.theta, policy.dim(), "ergodicity_probe.theta", Vector::Zero(policy.dim()));
  diagnostics::ErgodicityReport rep;
  if (p.sampled) {
    Rng rng = substream(c.seed, {0x6572676fULL});
    rep = diagnostics::probe_ergodicity_sampled(mdp, policy, theta, mdp.n_states(), p.n_max, p.trials, rng);
  } else {
    rep = diagnostics::probe_ergodicity(mdp, policy, theta, p.n_max);
  }
  io::CsvTable table({"n", "tv"});
  for (std::size_t i = 0; i < rep.steps.size(); ++i) table.row(rep.steps[i], rep.tv_to_limit[i]);
  out.write_csv("ergodicity_probe.csv", table);

  const Matrix p_pi = oracle::state_transition(mdp, oracle::policy_matrix(mdp, policy, theta));
  io::CsvTable fit({"fitted_log_decay", "fitted_c0", "exact_log_second_eigenvalue", "non_decaying", "bin_width",
                    "noise_floor"});
  fit.row(rep.fitted_log_decay, rep.fitted_c0, std::log(diagnostics::second_eigenvalue_modulus(p_pi)),
          static_cast<int>(rep.non_decaying), rep.bin_width, rep.noise_floor);
  out.write_csv("ergodicity_fit.csv", fit);
  return {};
}

inline Outcome run_noise_probe(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.noise_probe;
  const TabularMdp mdp = load_tabular_env(c);
  const auto policy = SoftmaxPolicy::tabular(mdp.n_states(), mdp.n_actions());
  const ParamVector theta = resolve_theta(p.theta, policy.dim(), "noise_probe.theta", Vector::Zero(policy.dim()));
  std::vector<diagnostics::NoiseReport> reps(p.batches.size());
  parallel_for(static_cast<int>(p.batches.size()), c.threads, [&](int i) {
    Rng rng = substream(c.seed, {0x6e6f6973ULL, static_cast<std::uint64_t>(i)});
    reps[i] = diagnostics::probe_grad_noise(mdp, policy, theta, mdp.gamma(), p.batches[i], p.repeats, rng);
  });
  io::CsvTable table({"B", "mean_sq_error", "mean_sq_error_se", "bound"});
  for (const auto& r : reps) table.row(r.batch, r.mean_sq_error, r.mean_sq_error_se, r.bound);
  out.write_csv("noise_probe.csv", table);
  return {};
}

inline Outcome run_oracle_check(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.oracle_check;
  const TabularMdp mdp = load_tabular_env(c);
  const auto policy = SoftmaxPolicy::tabular(mdp.n_states(), mdp.n_actions());
  Rng rng = substream(c.seed, {0x6f7261ULL});
  const ParamVector theta = resolve_theta(p.theta, policy.dim(), "oracle_check.theta",
                                          problems::random_normal(policy.dim(), rng, 0.5));
  const ParamVector other(problems::random_normal(policy.dim(), rng, 0.5));

  const Matrix pi = oracle::policy_matrix(mdp, policy, theta);
  const Matrix p_pi = oracle::state_transition(mdp, pi);
  const Vector v = oracle::exact_values(mdp, policy, theta);
  const Matrix q = oracle::q_from_values(mdp, v);
  const Matrix adv = q.colwise() - v;
  const Matrix d = oracle::exact_visitation(mdp, policy, theta);
  const Vector h = d.rowwise().sum();
  const Vector grad = oracle::analytic_gradient(mdp, policy, theta);
  const Matrix fisher = oracle::exact_fisher(mdp, policy, theta);
  const double scale = std::max(1.0, mdp.alpha() / (1.0 - mdp.gamma()));

  io::CsvTable table({"check", "value", "tolerance", "status"});
  bool all_ok = true;
  auto check = [&](const std::string& name, double value, double tol) {
    const bool ok = std::isfinite(value) && value <= tol;
    all_ok = all_ok && ok;
    table.row(name, value, tol, std::string(ok ? "PASS" : "FAIL"));
  };
  const double tol = p.tolerance * scale;
  check("bellman_residual", (v - oracle::policy_reward(mdp, pi) - mdp.gamma() * p_pi * v).cwiseAbs().maxCoeff(), tol);
  check("value_is_policy_average_of_q", (v - (pi.array() * q.array()).rowwise().sum().matrix()).cwiseAbs().maxCoeff(),
        tol);
  check("advantage_policy_mean_zero", (pi.array() * adv.array()).rowwise().sum().abs().maxCoeff(), tol);
  check("visitation_normalized", std::abs(d.sum() - 1.0), p.tolerance);
  check("visitation_flow_balance",
        (h - (1.0 - mdp.gamma()) * mdp.init_dist() - mdp.gamma() * p_pi.transpose() * h).cwiseAbs().maxCoeff(),
        p.tolerance);
  check("objective_via_visitation",
        std::abs(mdp.init_dist().dot(v) - (d.array() * mdp.reward_matrix().array()).sum() / (1.0 - mdp.gamma())), tol);
  {
    const Vector fd = oracle::richardson_gradient(mdp, policy, theta, 1e-4);
    check("gradient_vs_finite_differences", (grad - fd).norm() / std::max(grad.norm(), 1e-4), p.fd_tolerance);
  }
  check("fisher_trace_equals_psi_infty", std::abs(fisher.trace() - oracle::exact_psi_infty(mdp, policy, theta)),
        p.tolerance);
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(fisher);
    check("fisher_symmetric", (fisher - fisher.transpose()).cwiseAbs().maxCoeff(), p.tolerance);
    check("fisher_psd", std::max(0.0, -eig.eigenvalues().minCoeff()), p.tolerance);
  }
  {
    const auto [lhs, rhs] = oracle::performance_difference(mdp, policy, theta, other);
    check("performance_difference", std::abs(lhs - rhs), tol);
  }
  if (policy.is_tabular()) check("compat_error_tabular", oracle::compat_error(mdp, policy, theta), tol);
  check("mismatch_self_is_two", std::abs(oracle::mismatch_coefficient(mdp, policy, theta, theta) - 2.0), p.tolerance);

  out.write_csv("oracle_check.csv", table);
  if (!all_ok) return {kCheckFailed, "check_failed", "one or more oracle identities failed", false};
  return {};
}

inline Outcome run_rate_sweep(const ExperimentConfig& c, ArtifactWriter& out) {
  const auto& p = c.rate_sweep;
  const TabularMdp mdp = load_tabular_env(c);
  const auto policy = SoftmaxPolicy::tabular(mdp.n_states(), mdp.n_actions());
  const ParamVector theta0 = resolve_theta(c.theta0, policy.dim(), "run.theta0", Vector::Zero(policy.dim()));

  struct Job {
    Algo algo;
    double lambda;
  };
  std::vector<Job> jobs;
  for (double l : p.lambdas)
    for (Algo a : p.algos) jobs.push_back({a, l});
  std::vector<RunLog> logs(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), c.threads, [&](int i) {
    RunConfig rc;
    rc.algo = jobs[i].algo;
    rc.iterations = p.iterations;
    rc.batch = p.batch;
    rc.gamma = mdp.gamma();
    rc.schedule = RateSchedule::constant(jobs[i].lambda);
    rc.xi = p.xi;
    rc.seed = c.seed;
    rc.oracle_tracking = true;
    logs[i] = run(rc, mdp, policy, theta0);
  });

  auto label = [&](const Job& j) {
    return std::string(j.algo == Algo::pg ? "pg" : "npg") + "_lambda_" + io::format_double(j.lambda);
  };
  std::vector<std::string> header = {"t"};
  for (const auto& j : jobs) header.push_back(label(j));
  io::CsvTable curves(header);
  std::vector<double> running(jobs.size(), 0.0);
  for (int t = 1; t <= p.iterations; ++t) {
    std::vector<std::string> row = {std::to_string(t)};
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (t <= static_cast<int>(logs[i].records.size())) {
        const double g = *logs[i].records[t - 1].grad_norm_exact;
        running[i] += g * g;
        row.push_back(io::format_double(running[i] / t));
      } else {
        row.emplace_back();
      }
    }
    curves.push(std::move(row));
  }
  out.write_csv("rate_sweep.csv", curves);

  Outcome o;
  io::CsvTable fits({"algo", "lambda", "slope", "slope_se", "first_t_below_threshold"});
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::optional<double> slope, se;
    if (!logs[i].diverged) {
      const auto fit = diagnostics::fit_rate(logs[i], p.window_lo, p.window_hi);
      slope = fit.slope;
      se = fit.slope_se;
    } else if (!o.diverged) {
      o = {kDivergence, "diverged", label(jobs[i]) + ": " + logs[i].message, true};
    }
    std::optional<int> first;
    for (const auto& r : logs[i].records)
      if (*r.grad_norm_exact < p.grad_threshold) {
        first = r.t;
        break;
      }
    fits.row(std::string(jobs[i].algo == Algo::pg ? "pg" : "npg"), jobs[i].lambda, slope, se, first);
  }
  out.write_csv("rate_fit.csv", fits);
  return o;
}

// Executes the experiment and writes its CSVs plus manifest.json into output_dir.
// Runtime validation problems surface as ValidationError; everything written so
// far stays on disk and the manifest records the status.
inline Outcome run_experiment(const ExperimentConfig& c) {
  ArtifactWriter out(c.output_dir);
  Outcome o;
  try {
    switch (c.experiment) {
      case Experiment::run: o = run_single(c, out); break;
      case Experiment::tail_scan: o = run_tail_scan(c, out); break;
      case Experiment::exploration: o = run_exploration(c, out); break;
      case Experiment::moment_probe: o = run_moment_probe(c, out); break;
      case Experiment::smoothness_probe: o = run_smoothness_probe(c, out); break;
      case Experiment::ergodicity_probe: o = run_ergodicity_probe(c, out); break;
      case Experiment::noise_probe: o = run_noise_probe(c, out); break;
      case Experiment::oracle_check: o = run_oracle_check(c, out); break;
      case Experiment::rate_sweep: o = run_rate_sweep(c, out); break;
    }
  } catch (const ValidationError& e) {
    o = {kValidation, "validation_error", e.what(), false};
  } catch (const DivergenceError& e) {
    o = {kDivergence, "diverged", e.what(), true};
  }
  out.finish(c.echo, c.seed, o.status, o.diverged, o.message);
  return o;
}

}  // namespace hpg::cli
