#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hpg/env.hpp"
#include "hpg/policy/softmax.hpp"
#include "hpg/random.hpp"

// Small bundled problems used by the tests, the acceptance suite and the CLI.
namespace hpg::problems {

// Two states, two actions. Action 0 in state 0 keeps the chain in 0 (reward 1),
// action 1 moves it to 1; state 1 is a fair coin, rewarding action 1.
inline TabularMdp chain2(double gamma = 0.9) {
  return make_tabular({{{0.9, 0.1}, {0.1, 0.9}}, {{0.5, 0.5}, {0.5, 0.5}}}, {{1.0, 0.0}, {0.0, 1.0}}, gamma,
                      {0.5, 0.5}, 1.0);
}

// Under the uniform policy P_pi = [[0.7, 0.3], [0.3, 0.7]], eigenvalues 1 and 0.4.
// Starts in state 0.
inline TabularMdp mixing_chain(double gamma = 0.9) {
  return make_tabular({{{0.9, 0.1}, {0.5, 0.5}}, {{0.1, 0.9}, {0.5, 0.5}}}, {{0.5, 0.0}, {0.0, 0.5}}, gamma,
                      {1.0, 0.0}, 1.0);
}

// One state, rewards r[a], self loop.
inline TabularMdp bandit(const std::vector<double>& rewards, double gamma = 0.9) {
  double alpha = 0.0;
  for (double r : rewards) alpha = std::max(alpha, std::abs(r));
  std::vector<std::vector<double>> p(rewards.size(), std::vector<double>{1.0});
  return make_tabular({p}, {rewards}, gamma, {1.0}, alpha);
}

// Every transition row uniform; every state equally likely at the start.
inline TabularMdp uniform_chain(int n_states, int n_actions, double gamma = 0.9) {
  std::vector<std::vector<std::vector<double>>> p(
      n_states, std::vector<std::vector<double>>(n_actions, std::vector<double>(n_states, 1.0 / n_states)));
  std::vector<std::vector<double>> r(n_states, std::vector<double>(n_actions, 0.0));
  for (int s = 0; s < n_states; ++s) r[s][s % n_actions] = 1.0;
  return make_tabular(p, r, gamma, std::vector<double>(n_states, 1.0 / n_states), 1.0);
}

// Dense random MDP: Dirichlet(1) transition rows and initial law, rewards in [-1, 1].
inline TabularMdp random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
  auto simplex = [&rng](int n) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& x : w) {
      x = expo(rng);
      sum += x;
    }
    for (auto& x : w) x /= sum;
    return w;
  };
  std::vector<std::vector<std::vector<double>>> p(n_states);
  std::vector<std::vector<double>> r(n_states, std::vector<double>(n_actions));
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      p[s].push_back(simplex(n_states));
      r[s][a] = 2.0 * uniform01(rng) - 1.0;
    }
  }
  return make_tabular(p, r, gamma, simplex(n_states), 1.0);
}

inline Vector random_normal(Eigen::Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// One state, three actions, a single shared parameter: logits (-theta, 0, theta).
// J peaks at theta -> -inf (reward 1) with a weaker local optimum at +inf (0.9).
inline SoftmaxPolicy tied_three_arm_policy() {
  Matrix f(3, 1);
  f << -1.0, 0.0, 1.0;
  return SoftmaxPolicy(1, 3, f);
}

inline TabularMdp tied_three_arm_bandit(double gamma = 0.5) { return bandit({1.0, 0.0, 0.9}, gamma); }

// Tabular chain2 with logits tied across states: theta in R^2, phi(s, a) = e_a.
inline SoftmaxPolicy state_blind_policy(int n_states, int n_actions) {
  Matrix f = Matrix::Zero(static_cast<Eigen::Index>(n_states) * n_actions, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) f(static_cast<Eigen::Index>(s) * n_actions + a, a) = 1.0;
  return SoftmaxPolicy(n_states, n_actions, f);
}

inline TabularMdp builtin(const std::string& name) {
  if (name == "chain2") return chain2();
  if (name == "mixing_chain") return mixing_chain();
  if (name == "two_armed_bandit") return bandit({1.0, 0.0});
  if (name == "tied_three_arm_bandit") return tied_three_arm_bandit();
  throw ValidationError("unknown builtin MDP '" + name + "'");
}

}  // namespace hpg::problems
