#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hpg/random.hpp"
#include "hpg/types.hpp"

namespace hpg {

template <class State>
struct Transition {
  State next;
  double reward;
};

template <class E>
concept Environment = requires(const E& env, Rng& rng, const typename E::state_type& s,
                               const typename E::action_type& a) {
  { env.initial_state(rng) } -> std::same_as<typename E::state_type>;
  { env.step(s, a, rng) } -> std::same_as<Transition<typename E::state_type>>;
  { env.reward_bound() } -> std::convertible_to<double>;
};

// Finite MDP with explicit arrays. Rewards are the deterministic means r[s][a].
class TabularMdp {
 public:
  using state_type = int;
  using action_type = int;

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  double alpha() const { return alpha_; }
  double reward_bound() const { return alpha_; }
  const Vector& init_dist() const { return rho_; }

  double p(int s, int a, int next) const { return transition_[index(s, a) * n_states_ + next]; }
  double reward(int s, int a) const { return reward_(s, a); }
  const Matrix& reward_matrix() const { return reward_; }

  int initial_state(Rng& rng) const { return draw_categorical(rho_.data(), n_states_, rng); }

  Transition<int> step(int s, int a, Rng& rng) const {
    const double* row = transition_.data() + index(s, a) * n_states_;
    return {draw_categorical(row, n_states_, rng), reward_(s, a)};
  }

  // Flattened P[s][a][s'] in row-major order.
  const std::vector<double>& transition_flat() const { return transition_; }

  friend TabularMdp make_tabular(const std::vector<std::vector<std::vector<double>>>& transition,
                                 const std::vector<std::vector<double>>& reward, double gamma,
                                 const std::vector<double>& rho, double alpha);

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) +
           static_cast<std::size_t>(a);
  }

  static int draw_categorical(const double* probs, int n, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // u landed in the roundoff gap above the last cumulative value.
    for (int i = n - 1; i >= 0; --i) {
      if (probs[i] > 0.0) return i;
    }
    return n - 1;
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> transition_;
  Matrix reward_;
  double gamma_ = 0.0;
  Vector rho_;
  double alpha_ = 0.0;
};

namespace detail {
inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}
}  // namespace detail

inline TabularMdp make_tabular(const std::vector<std::vector<std::vector<double>>>& transition,
                               const std::vector<std::vector<double>>& reward, double gamma,
                               const std::vector<double>& rho, double alpha) {
  constexpr double kSumTol = 1e-12;
  using detail::fmt_num;
  const auto n_states = static_cast<int>(transition.size());
  require(n_states > 0, "make_tabular: need at least one state");
  const auto n_actions = static_cast<int>(transition[0].size());
  require(n_actions > 0, "make_tabular: need at least one action");
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma < 1.0,
          "make_tabular: gamma must lie in [0,1), got " + fmt_num(gamma));
  require(std::isfinite(alpha) && alpha >= 0.0, "make_tabular: alpha must be nonnegative");
  require(static_cast<int>(reward.size()) == n_states,
          "make_tabular: reward has " + std::to_string(reward.size()) + " rows, expected " +
              std::to_string(n_states));
  require(static_cast<int>(rho.size()) == n_states,
          "make_tabular: rho has length " + std::to_string(rho.size()) + ", expected " +
              std::to_string(n_states));

  TabularMdp mdp;
  mdp.n_states_ = n_states;
  mdp.n_actions_ = n_actions;
  mdp.gamma_ = gamma;
  mdp.alpha_ = alpha;
  mdp.transition_.reserve(static_cast<std::size_t>(n_states) * n_actions * n_states);
  mdp.reward_ = Matrix(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    require(static_cast<int>(transition[s].size()) == n_actions,
            "make_tabular: P[" + std::to_string(s) + "] has wrong number of actions");
    require(static_cast<int>(reward[s].size()) == n_actions,
            "make_tabular: r[" + std::to_string(s) + "] has wrong number of actions");
    for (int a = 0; a < n_actions; ++a) {
      const auto& row = transition[s][a];
      const std::string where = "P[" + std::to_string(s) + "][" + std::to_string(a) + "]";
      require(static_cast<int>(row.size()) == n_states,
              "make_tabular: " + where + " has length " + std::to_string(row.size()) +
                  ", expected " + std::to_string(n_states));
      double sum = 0.0;
      for (double v : row) {
        require(std::isfinite(v) && v >= 0.0, "make_tabular: " + where + " has a negative entry");
        sum += v;
      }
      require(std::abs(sum - 1.0) <= kSumTol,
              "make_tabular: " + where + " row sum " + fmt_num(sum) + " ≠ 1");
      mdp.transition_.insert(mdp.transition_.end(), row.begin(), row.end());
      const double r = reward[s][a];
      require(std::isfinite(r) && std::abs(r) <= alpha,
              "make_tabular: |r[" + std::to_string(s) + "][" + std::to_string(a) + "]| = " +
                  fmt_num(std::abs(r)) + " exceeds alpha = " + fmt_num(alpha));
      mdp.reward_(s, a) = r;
    }
  }
  mdp.rho_ = Vector(n_states);
  double rho_sum = 0.0;
  for (int s = 0; s < n_states; ++s) {
    require(std::isfinite(rho[s]) && rho[s] >= 0.0, "make_tabular: rho has a negative entry");
    mdp.rho_[s] = rho[s];
    rho_sum += rho[s];
  }
  require(std::abs(rho_sum - 1.0) <= kSumTol,
          "make_tabular: rho sum " + fmt_num(rho_sum) + " ≠ 1");
  return mdp;
}

// Reward of the 1-D exploration bandit: a unit-height parabola around the target.
inline double exploration_reward(double a, double theta_star) {
  const double d = a - theta_star;
  return std::abs(d) <= 1.0 ? 1.0 - d * d : 0.0;
}

// Single-state bandit with continuous action and hidden target theta_star.
class ExplorationBandit {
 public:
  using state_type = int;
  using action_type = double;

  explicit ExplorationBandit(double theta_star) : theta_star_(theta_star) {
    require(std::isfinite(theta_star), "ExplorationBandit: theta_star must be finite");
  }

  double theta_star() const { return theta_star_; }
  double gamma() const { return 0.0; }
  double reward_bound() const { return 1.0; }

  int initial_state(Rng&) const { return 0; }
  Transition<int> step(int, double a, Rng&) const { return {0, exploration_reward(a, theta_star_)}; }

 private:
  double theta_star_;
};

// One state, arbitrary action type, action-only reward. "Uniform dynamics".
template <class Action>
class SingleStateEnv {
 public:
  using state_type = int;
  using action_type = Action;

  SingleStateEnv() : reward_([](const Action&) { return 0.0; }), alpha_(0.0) {}
  SingleStateEnv(std::function<double(const Action&)> reward, double alpha)
      : reward_(std::move(reward)), alpha_(alpha) {}

  double reward_bound() const { return alpha_; }
  int initial_state(Rng&) const { return 0; }
  Transition<int> step(int, const Action& a, Rng&) const { return {0, reward_(a)}; }

 private:
  std::function<double(const Action&)> reward_;
  double alpha_;
};

template <class State, class Action>
struct TrajectorySample {
  std::vector<State> states;
  std::vector<Action> actions;
  std::vector<double> rewards;

  std::size_t length() const { return states.size(); }
};

template <class State, class Action>
struct VisitationDraw {
  State state;
  Action action;
  std::int64_t horizon_j = 0;
};

// Rolls `length` transitions of pi_theta from rho.
template <Environment Env, class Policy>
auto sample_trajectory(const Env& env, const Policy& policy, const ParamVector& theta, int length,
                       Rng& rng) {
  using S = typename Env::state_type;
  using A = typename Env::action_type;
  require(length >= 1, "sample_trajectory: length must be >= 1");
  TrajectorySample<S, A> traj;
  traj.states.reserve(length);
  traj.actions.reserve(length);
  traj.rewards.reserve(length);
  S s = env.initial_state(rng);
  for (int t = 0; t < length; ++t) {
    A a = policy.sample_action(theta, s, rng);
    auto tr = env.step(s, a, rng);
    traj.states.push_back(s);
    traj.actions.push_back(a);
    traj.rewards.push_back(tr.reward);
    s = tr.next;
  }
  return traj;
}

// Draws (s_j, a_j) with j ~ Geom(1-gamma); the pair is distributed as d_theta^rho.
template <Environment Env, class Policy>
auto sample_visitation(const Env& env, const Policy& policy, const ParamVector& theta, double gamma,
                       Rng& rng) {
  using S = typename Env::state_type;
  using A = typename Env::action_type;
  require(gamma >= 0.0 && gamma < 1.0, "sample_visitation: gamma must lie in [0,1)");
  const std::int64_t j = geom_draw(1.0 - gamma, rng);
  S s = env.initial_state(rng);
  for (std::int64_t u = 0; u < j; ++u) {
    A a = policy.sample_action(theta, s, rng);
    s = env.step(s, a, rng).next;
  }
  A a = policy.sample_action(theta, s, rng);
  return VisitationDraw<S, A>{s, a, j};
}

}  // namespace hpg
