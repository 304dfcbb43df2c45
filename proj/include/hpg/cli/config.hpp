#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hpg/optimizers.hpp"
#include "json.hpp"

namespace hpg::cli {

using nlohmann::json;

enum class Experiment {
  run,
  tail_scan,
  exploration,
  moment_probe,
  smoothness_probe,
  ergodicity_probe,
  noise_probe,
  oracle_check,
  rate_sweep
};

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::run, "run"},
      {Experiment::tail_scan, "tail_scan"},
      {Experiment::exploration, "exploration"},
      {Experiment::moment_probe, "moment_probe"},
      {Experiment::smoothness_probe, "smoothness_probe"},
      {Experiment::ergodicity_probe, "ergodicity_probe"},
      {Experiment::noise_probe, "noise_probe"},
      {Experiment::oracle_check, "oracle_check"},
      {Experiment::rate_sweep, "rate_sweep"}};
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, name] : experiment_names())
    if (k == e) return name;
  return "?";
}

inline std::optional<Experiment> experiment_from_string(const std::string& s) {
  for (const auto& [k, name] : experiment_names())
    if (name == s) return k;
  return std::nullopt;
}

enum class EnvKind { tabular, exploration_bandit, unit_ball };
enum class PolicyKind { tabular_softmax, generalized_gaussian, safe_log_barrier };

struct EnvSpec {
  EnvKind kind = EnvKind::tabular;
  std::string builtin = "chain2";
  std::optional<std::filesystem::path> file;
  double theta_star = 3.9;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::tabular_softmax;
  double kappa = 1.2;
  int action_dim = 2;
  std::vector<double> phi_star;  // empty: origin
};

struct ExplorationParams {
  double theta_star = 3.9;
  double theta0 = 0.0;
  std::vector<double> kappas = {1.2, 2.0};
  int seeds = 5;
  int batch = 1000;
  int iterations = 3000;
  double lambda = 3.0;
  double threshold = 0.5;
  Algo algo = Algo::pg;
  double xi = 0.1;
  double region_halfwidth = 1.0;
};

struct TailScanParams {
  double kappa_a = 2.0;
  double kappa_b = 1.2;
  double lo = -2.0;
  double hi = 2.0;
  int points = 41;
  int n_actions = 4000;
};

struct MomentParams {
  std::vector<double> theta;  // empty: policy default
  std::int64_t n_max = 100000;
  int per_decade = 10;
  double gamma = 0.0;  // visitation discount for non-tabular envs
};

struct SmoothnessParams {
  std::vector<double> theta;
  double radius_min = 1e-3;
  double radius_max = 1e-1;
  int n_radii = 9;
};

struct ErgodicityParams {
  std::vector<double> theta;
  int n_max = 30;
  bool sampled = false;
  int trials = 20000;
};

struct NoiseParams {
  std::vector<double> theta;
  std::vector<int> batches = {10, 100, 1000};
  int repeats = 200;
};

struct OracleCheckParams {
  std::vector<double> theta;
  double tolerance = 1e-10;
  double fd_tolerance = 1e-4;
};

struct RateSweepParams {
  std::vector<double> lambdas = {0.5};
  std::vector<Algo> algos = {Algo::pg, Algo::npg};
  int iterations = 1000;
  int batch = 200;
  double xi = 0.1;
  int window_lo = 10;
  int window_hi = 1000;
  double grad_threshold = 0.05;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::run;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  int threads = 1;
  EnvSpec env;
  PolicySpec policy;
  RunConfig run;
  bool gamma_given = false;    // run.gamma set explicitly; otherwise a tabular env keeps its own
  std::vector<double> theta0;  // empty: zeros
  ExplorationParams exploration;
  TailScanParams tail_scan;
  MomentParams moment_probe;
  SmoothnessParams smoothness_probe;
  ErgodicityParams ergodicity_probe;
  NoiseParams noise_probe;
  OracleCheckParams oracle_check;
  RateSweepParams rate_sweep;
  json echo;  // the document as read, with command-line overrides applied
};

class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : ValidationError(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) out += (out.empty() ? "" : "\n") + e;
    return out;
  }
  std::vector<std::string> errors_;
};

struct Overrides {
  std::optional<Experiment> experiment;  // from the subcommand
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> threads;
};

namespace detail {

// Reads one JSON object, recording every problem under its dotted key.
class Section {
 public:
  Section(const json& obj, std::string prefix, std::vector<std::string>& errors, std::set<std::string> allowed)
      : prefix_(std::move(prefix)), errors_(errors) {
    if (obj.is_null()) {
      obj_ = json::object();
    } else if (!obj.is_object()) {
      errors_.push_back(name("") + ": must be an object");
      obj_ = json::object();
    } else {
      obj_ = obj;
    }
    for (const auto& [key, _] : obj_.items())
      if (!allowed.count(key)) errors_.push_back(name(key) + ": unknown key");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }
  const json& raw(const std::string& key) const { return obj_.at(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!obj_.contains(key)) return fallback;
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(name(key) + ": wrong type");
      return fallback;
    }
  }

  template <class T>
  std::optional<T> required(const std::string& key) {
    if (!obj_.contains(key)) {
      errors_.push_back(name(key) + ": missing required field");
      return std::nullopt;
    }
    T fallback{};
    const std::size_t before = errors_.size();
    T v = get<T>(key, fallback);
    if (errors_.size() != before) return std::nullopt;
    return v;
  }

  Section child(const std::string& key, std::set<std::string> allowed) {
    static const json kNull;
    return Section(obj_.contains(key) ? obj_.at(key) : kNull, name(key), errors_, std::move(allowed));
  }

  void check(bool ok, const std::string& key, const std::string& message) {
    if (!ok) errors_.push_back(name(key) + ": " + message);
  }

  std::string name(const std::string& key) const {
    if (key.empty()) return prefix_.empty() ? "<root>" : prefix_;
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

 private:
  json obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
};

inline std::optional<Algo> algo_from(const std::string& s) {
  if (s == "pg") return Algo::pg;
  if (s == "npg") return Algo::npg;
  return std::nullopt;
}

inline void check_finite(Section& sec, const std::string& key, const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) {
      sec.check(false, key, "values must be finite");
      return;
    }
}

}  // namespace detail

// Validates a parsed document. Relative file paths resolve against base_dir.
inline ExperimentConfig parse_config_json(const json& doc, const std::filesystem::path& base_dir,
                                          const Overrides& overrides = {}) {
  using detail::Section;
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  cfg.echo = doc.is_object() ? doc : json::object();

  Section root(doc, "", errors,
               {"experiment", "seed", "output_dir", "threads", "env", "policy", "run", "exploration", "tail_scan",
                "moment_probe", "smoothness_probe", "ergodicity_probe", "noise_probe", "oracle_check", "rate_sweep"});

  // experiment
  if (root.has("experiment")) {
    const auto name = root.get<std::string>("experiment", "");
    const auto e = experiment_from_string(name);
    root.check(e.has_value(), "experiment", "unknown experiment '" + name + "'");
    if (e) {
      cfg.experiment = *e;
      if (overrides.experiment && *overrides.experiment != *e)
        root.check(false, "experiment", "config says '" + name + "' but the subcommand is '" +
                                            to_string(*overrides.experiment) + "'");
    }
  } else if (overrides.experiment) {
    cfg.experiment = *overrides.experiment;
  } else {
    root.check(false, "experiment", "missing required field");
  }
  cfg.echo["experiment"] = to_string(cfg.experiment);

  // seed, output_dir, threads
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
  } else if (root.has("seed")) {
    const json& s = root.raw("seed");
    root.check(s.is_number_integer() && (s.is_number_unsigned() || s.get<std::int64_t>() >= 0), "seed",
               "must be a non-negative integer");
    if (s.is_number_integer()) cfg.seed = s.get<std::uint64_t>();
  } else {
    root.check(false, "seed", "missing required field (pass --seed or set it in the config)");
  }
  cfg.echo["seed"] = cfg.seed;
  cfg.output_dir = overrides.output_dir ? *overrides.output_dir
                                        : std::filesystem::path(root.get<std::string>("output_dir", "out"));
  cfg.echo["output_dir"] = cfg.output_dir.string();
  cfg.threads = overrides.threads ? *overrides.threads : root.get<int>("threads", 1);
  root.check(cfg.threads >= 1, "threads", "must be >= 1");
  cfg.echo["threads"] = cfg.threads;

  // env
  {
    Section env = root.child("env", {"kind", "builtin", "file", "theta_star"});
    const std::string kind = env.get<std::string>("kind", cfg.experiment == Experiment::moment_probe ? "unit_ball"
                                                                                                    : "tabular");
    if (kind == "tabular") {
      cfg.env.kind = EnvKind::tabular;
    } else if (kind == "exploration_bandit") {
      cfg.env.kind = EnvKind::exploration_bandit;
    } else if (kind == "unit_ball") {
      cfg.env.kind = EnvKind::unit_ball;
    } else {
      env.check(false, "kind", "unknown env kind '" + kind + "' (tabular, exploration_bandit, unit_ball)");
    }
    cfg.env.builtin = env.get<std::string>(
        "builtin", cfg.experiment == Experiment::ergodicity_probe ? "mixing_chain" : "chain2");
    if (env.has("builtin")) {
      static const std::set<std::string> kBuiltins = {"chain2", "mixing_chain", "two_armed_bandit",
                                                      "tied_three_arm_bandit"};
      env.check(kBuiltins.count(cfg.env.builtin) > 0, "builtin", "unknown builtin '" + cfg.env.builtin + "'");
      env.check(!env.has("file"), "file", "give either 'builtin' or 'file', not both");
    }
    if (env.has("file")) {
      std::filesystem::path p = env.get<std::string>("file", "");
      if (p.is_relative()) p = base_dir / p;
      env.check(std::filesystem::exists(p), "file", "file does not exist: " + p.string());
      cfg.env.file = p;
    }
    cfg.env.theta_star = env.get<double>("theta_star", 3.9);
    env.check(std::isfinite(cfg.env.theta_star), "theta_star", "must be finite");
  }

  // policy
  {
    Section pol = root.child("policy", {"kind", "kappa", "action_dim", "phi_star"});
    const char* fallback = cfg.env.kind == EnvKind::tabular              ? "tabular_softmax"
                           : cfg.env.kind == EnvKind::exploration_bandit ? "generalized_gaussian"
                                                                         : "safe_log_barrier";
    const std::string kind = pol.get<std::string>("kind", fallback);
    if (kind == "tabular_softmax") {
      cfg.policy.kind = PolicyKind::tabular_softmax;
    } else if (kind == "generalized_gaussian") {
      cfg.policy.kind = PolicyKind::generalized_gaussian;
    } else if (kind == "safe_log_barrier") {
      cfg.policy.kind = PolicyKind::safe_log_barrier;
    } else {
      pol.check(false, "kind",
                "unknown policy kind '" + kind + "' (tabular_softmax, generalized_gaussian, safe_log_barrier)");
    }
    cfg.policy.kappa = pol.get<double>("kappa", 1.2);
    pol.check(cfg.policy.kappa > 1.0 && cfg.policy.kappa <= 2.0, "kappa", "kappa must lie in (1,2]");
    cfg.policy.action_dim = pol.get<int>("action_dim", 2);
    pol.check(cfg.policy.action_dim == 1 || cfg.policy.action_dim == 2, "action_dim", "must be 1 or 2");
    cfg.policy.phi_star = pol.get<std::vector<double>>("phi_star", {});
    if (!cfg.policy.phi_star.empty()) {
      pol.check(static_cast<int>(cfg.policy.phi_star.size()) == cfg.policy.action_dim, "phi_star",
                "needs action_dim entries");
      double sq = 0.0;
      for (double x : cfg.policy.phi_star) sq += x * x;
      pol.check(sq < 1.0, "phi_star", "must lie strictly inside the unit ball");
    }

    const bool combo_ok = (cfg.env.kind == EnvKind::tabular && cfg.policy.kind == PolicyKind::tabular_softmax) ||
                          (cfg.env.kind == EnvKind::exploration_bandit &&
                           cfg.policy.kind == PolicyKind::generalized_gaussian) ||
                          (cfg.env.kind == EnvKind::unit_ball && cfg.policy.kind == PolicyKind::safe_log_barrier);
    pol.check(combo_ok, "kind",
              "policy does not fit the env (tabular/tabular_softmax, exploration_bandit/generalized_gaussian, "
              "unit_ball/safe_log_barrier)");
  }

  // run
  {
    Section run = root.child("run", {"algo", "T", "B", "gamma", "xi", "schedule", "oracle_tracking", "theta0"});
    const auto algo = run.get<std::string>("algo", "pg");
    const auto a = detail::algo_from(algo);
    run.check(a.has_value(), "algo", "must be 'pg' or 'npg'");
    cfg.run.algo = a.value_or(Algo::pg);
    cfg.run.iterations = run.get<int>("T", 100);
    run.check(cfg.run.iterations >= 1, "T", "T must be >= 1");
    cfg.run.batch = run.get<int>("B", 100);
    run.check(cfg.run.batch >= 1, "B", "B must be >= 1");
    const double default_gamma = cfg.env.kind == EnvKind::tabular ? 0.9 : 0.0;
    cfg.run.gamma = run.get<double>("gamma", default_gamma);
    cfg.gamma_given = run.has("gamma");
    run.check(cfg.run.gamma >= 0.0 && cfg.run.gamma < 1.0, "gamma", "gamma must lie in [0,1)");
    cfg.run.xi = run.get<double>("xi", 0.1);
    if (cfg.run.algo == Algo::npg) run.check(cfg.run.xi > 0.0 && cfg.run.xi <= 1.0, "xi", "xi must lie in (0,1]");
    cfg.run.oracle_tracking = run.get<bool>("oracle_tracking", false);
    run.check(!cfg.run.oracle_tracking || cfg.env.kind == EnvKind::tabular, "oracle_tracking",
              "needs a tabular env");
    cfg.theta0 = run.get<std::vector<double>>("theta0", {});
    detail::check_finite(run, "theta0", cfg.theta0);

    Section sch = run.child("schedule", {"kind", "lambda", "q", "beta0"});
    const auto kind = sch.get<std::string>("kind", "constant");
    if (kind == "constant") {
      cfg.run.schedule.kind = ScheduleKind::constant;
    } else if (kind == "horizon_scaled") {
      cfg.run.schedule.kind = ScheduleKind::horizon_scaled;
    } else if (kind == "decaying") {
      cfg.run.schedule.kind = ScheduleKind::decaying;
    } else {
      sch.check(false, "kind", "unknown schedule '" + kind + "' (constant, horizon_scaled, decaying)");
    }
    cfg.run.schedule.lambda = sch.get<double>("lambda", 0.1);
    sch.check(std::isfinite(cfg.run.schedule.lambda) && cfg.run.schedule.lambda > 0.0, "lambda",
              "lambda must be positive");
    cfg.run.schedule.q = sch.get<double>("q", 0.5);
    if (cfg.run.schedule.kind == ScheduleKind::decaying)
      sch.check(cfg.run.schedule.q >= 0.0 && cfg.run.schedule.q < 1.0, "q", "q must lie in [0,1)");
    cfg.run.schedule.beta0 = sch.get<double>("beta0", 1.0);
    if (cfg.run.schedule.kind == ScheduleKind::horizon_scaled)
      sch.check(cfg.run.schedule.beta0 > 0.0 && cfg.run.schedule.beta0 <= 1.0, "beta0", "beta0 must lie in (0,1]");
    cfg.run.seed = cfg.seed;
    cfg.run.batch_options.threads = cfg.threads;
  }

  // exploration
  {
    Section ex = root.child("exploration", {"theta_star", "theta0", "kappas", "seeds", "B", "T", "lambda",
                                            "threshold", "algo", "xi", "region_halfwidth"});
    auto& p = cfg.exploration;
    p.theta_star = ex.get<double>("theta_star", p.theta_star);
    ex.check(std::isfinite(p.theta_star), "theta_star", "must be finite");
    p.theta0 = ex.get<double>("theta0", p.theta0);
    ex.check(std::isfinite(p.theta0), "theta0", "must be finite");
    p.kappas = ex.get<std::vector<double>>("kappas", p.kappas);
    ex.check(!p.kappas.empty(), "kappas", "must not be empty");
    for (double k : p.kappas) ex.check(k > 1.0 && k <= 2.0, "kappas", "kappa must lie in (1,2]");
    p.seeds = ex.get<int>("seeds", p.seeds);
    ex.check(p.seeds >= 1, "seeds", "must be >= 1");
    p.batch = ex.get<int>("B", p.batch);
    ex.check(p.batch >= 1, "B", "B must be >= 1");
    p.iterations = ex.get<int>("T", p.iterations);
    ex.check(p.iterations >= 1, "T", "T must be >= 1");
    p.lambda = ex.get<double>("lambda", p.lambda);
    ex.check(std::isfinite(p.lambda) && p.lambda > 0.0, "lambda", "lambda must be positive");
    p.threshold = ex.get<double>("threshold", p.threshold);
    const auto algo = detail::algo_from(ex.get<std::string>("algo", "pg"));
    ex.check(algo.has_value(), "algo", "must be 'pg' or 'npg'");
    p.algo = algo.value_or(Algo::pg);
    p.xi = ex.get<double>("xi", p.xi);
    if (p.algo == Algo::npg) ex.check(p.xi > 0.0 && p.xi <= 1.0, "xi", "xi must lie in (0,1]");
    p.region_halfwidth = ex.get<double>("region_halfwidth", p.region_halfwidth);
    ex.check(p.region_halfwidth > 0.0, "region_halfwidth", "must be positive");
  }

  // tail_scan
  {
    Section ts = root.child("tail_scan", {"kappa_a", "kappa_b", "range", "points", "n_actions"});
    auto& p = cfg.tail_scan;
    p.kappa_a = ts.get<double>("kappa_a", p.kappa_a);
    ts.check(p.kappa_a > 1.0 && p.kappa_a <= 2.0, "kappa_a", "kappa must lie in (1,2]");
    p.kappa_b = ts.get<double>("kappa_b", p.kappa_b);
    ts.check(p.kappa_b > 1.0 && p.kappa_b <= 2.0, "kappa_b", "kappa must lie in (1,2]");
    const auto range = ts.get<std::vector<double>>("range", {p.lo, p.hi});
    ts.check(range.size() == 2 && range[0] < range[1], "range", "must be [lo, hi] with lo < hi");
    if (range.size() == 2) p.lo = range[0], p.hi = range[1];
    p.points = ts.get<int>("points", p.points);
    ts.check(p.points >= 2, "points", "must be >= 2");
    p.n_actions = ts.get<int>("n_actions", p.n_actions);
    ts.check(p.n_actions >= 1, "n_actions", "must be >= 1");
  }

  // moment_probe
  {
    Section mp = root.child("moment_probe", {"theta", "n_max", "per_decade", "gamma"});
    auto& p = cfg.moment_probe;
    p.theta = mp.get<std::vector<double>>("theta", {});
    detail::check_finite(mp, "theta", p.theta);
    p.n_max = mp.get<std::int64_t>("n_max", p.n_max);
    mp.check(p.n_max >= 1, "n_max", "must be >= 1");
    p.per_decade = mp.get<int>("per_decade", p.per_decade);
    mp.check(p.per_decade >= 1, "per_decade", "must be >= 1");
    p.gamma = mp.get<double>("gamma", p.gamma);
    mp.check(p.gamma >= 0.0 && p.gamma < 1.0, "gamma", "gamma must lie in [0,1)");
  }

  // smoothness_probe
  {
    Section sp = root.child("smoothness_probe", {"theta", "radius_min", "radius_max", "n_radii"});
    auto& p = cfg.smoothness_probe;
    p.theta = sp.get<std::vector<double>>("theta", {});
    detail::check_finite(sp, "theta", p.theta);
    p.radius_min = sp.get<double>("radius_min", p.radius_min);
    p.radius_max = sp.get<double>("radius_max", p.radius_max);
    sp.check(p.radius_min > 0.0 && p.radius_min < p.radius_max, "radius_min", "need 0 < radius_min < radius_max");
    p.n_radii = sp.get<int>("n_radii", p.n_radii);
    sp.check(p.n_radii >= 8, "n_radii", "need at least 8 radii");
    if (cfg.experiment == Experiment::smoothness_probe)
      sp.check(cfg.policy.kind != PolicyKind::safe_log_barrier, "theta",
               "the smoothness probe supports tabular_softmax and generalized_gaussian policies");
  }

  // ergodicity_probe
  {
    Section ep = root.child("ergodicity_probe", {"theta", "n_max", "sampled", "trials"});
    auto& p = cfg.ergodicity_probe;
    p.theta = ep.get<std::vector<double>>("theta", {});
    detail::check_finite(ep, "theta", p.theta);
    p.n_max = ep.get<int>("n_max", p.n_max);
    ep.check(p.n_max >= 2, "n_max", "must be >= 2");
    p.sampled = ep.get<bool>("sampled", p.sampled);
    p.trials = ep.get<int>("trials", p.trials);
    ep.check(p.trials >= 1, "trials", "must be >= 1");
  }

  // noise_probe
  {
    Section np = root.child("noise_probe", {"theta", "batches", "repeats"});
    auto& p = cfg.noise_probe;
    p.theta = np.get<std::vector<double>>("theta", {});
    detail::check_finite(np, "theta", p.theta);
    p.batches = np.get<std::vector<int>>("batches", p.batches);
    np.check(!p.batches.empty(), "batches", "must not be empty");
    for (int b : p.batches) np.check(b >= 1, "batches", "B must be >= 1");
    p.repeats = np.get<int>("repeats", p.repeats);
    np.check(p.repeats >= 2, "repeats", "must be >= 2");
  }

  // oracle_check
  {
    Section oc = root.child("oracle_check", {"theta", "tolerance", "fd_tolerance"});
    auto& p = cfg.oracle_check;
    p.theta = oc.get<std::vector<double>>("theta", {});
    detail::check_finite(oc, "theta", p.theta);
    p.tolerance = oc.get<double>("tolerance", p.tolerance);
    oc.check(p.tolerance > 0.0, "tolerance", "must be positive");
    p.fd_tolerance = oc.get<double>("fd_tolerance", p.fd_tolerance);
    oc.check(p.fd_tolerance > 0.0, "fd_tolerance", "must be positive");
  }

  // rate_sweep
  {
    Section rs = root.child("rate_sweep",
                            {"lambdas", "algos", "T", "B", "xi", "window", "grad_threshold"});
    auto& p = cfg.rate_sweep;
    p.lambdas = rs.get<std::vector<double>>("lambdas", p.lambdas);
    rs.check(!p.lambdas.empty(), "lambdas", "must not be empty");
    for (double l : p.lambdas) rs.check(std::isfinite(l) && l > 0.0, "lambdas", "lambda must be positive");
    if (rs.has("algos")) {
      p.algos.clear();
      for (const auto& s : rs.get<std::vector<std::string>>("algos", {})) {
        const auto a = detail::algo_from(s);
        rs.check(a.has_value(), "algos", "entries must be 'pg' or 'npg'");
        if (a) p.algos.push_back(*a);
      }
      rs.check(!p.algos.empty(), "algos", "must not be empty");
    }
    p.iterations = rs.get<int>("T", p.iterations);
    rs.check(p.iterations >= 1, "T", "T must be >= 1");
    p.batch = rs.get<int>("B", p.batch);
    rs.check(p.batch >= 1, "B", "B must be >= 1");
    p.xi = rs.get<double>("xi", p.xi);
    rs.check(p.xi > 0.0 && p.xi <= 1.0, "xi", "xi must lie in (0,1]");
    const auto window = rs.get<std::vector<int>>("window", {p.window_lo, std::min(p.window_hi, p.iterations)});
    rs.check(window.size() == 2, "window", "must be [lo, hi]");
    if (window.size() == 2) {
      p.window_lo = window[0];
      p.window_hi = window[1];
      rs.check(p.window_lo >= 1 && p.window_hi <= p.iterations && p.window_hi - p.window_lo + 1 >= 5, "window",
               "window must lie in [1, T] and span at least 5 iterations");
    }
    p.grad_threshold = rs.get<double>("grad_threshold", p.grad_threshold);
    rs.check(p.grad_threshold > 0.0, "grad_threshold", "must be positive");
  }

  // experiments that need the exact oracle
  const bool needs_tabular = cfg.experiment == Experiment::ergodicity_probe ||
                             cfg.experiment == Experiment::noise_probe ||
                             cfg.experiment == Experiment::oracle_check || cfg.experiment == Experiment::rate_sweep;
  if (needs_tabular)
    root.check(cfg.env.kind == EnvKind::tabular, "env", to_string(cfg.experiment) + " needs a tabular env");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path, const Overrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot read " + path.string()});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError({"config: " + path.string() + ": " + e.what()});
  }
  return parse_config_json(doc, path.parent_path(), overrides);
}

}  // namespace hpg::cli
