#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "hpg/env.hpp"
#include "hpg/estimators.hpp"
#include "hpg/policy/policy.hpp"
#include "hpg/types.hpp"

namespace hpg {

// Exact quantities on a TabularMdp under a discrete policy. Everything reduces
// to dense solves with (I - gamma P_pi); state counts are small.
namespace oracle {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <DiscretePolicy Pol>
Matrix policy_matrix(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  require(policy.n_actions() == mdp.n_actions(), "oracle: policy and MDP disagree on |A|");
  Matrix pi(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) pi.row(s) = policy.probabilities(theta, s).transpose();
  return pi;
}

// P_pi(s, s') = sum_a pi(a|s) P(s'|s, a)
inline Matrix state_transition(const TabularMdp& mdp, const Matrix& pi) {
  const int ns = mdp.n_states();
  Matrix p = Matrix::Zero(ns, ns);
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      for (int t = 0; t < ns; ++t) p(s, t) += pi(s, a) * mdp.p(s, a, t);
  return p;
}

inline Vector policy_reward(const TabularMdp& mdp, const Matrix& pi) {
  return (pi.array() * mdp.reward_matrix().array()).rowwise().sum();
}

inline Matrix bellman_operator(const TabularMdp& mdp, const Matrix& p_pi) {
  return Matrix::Identity(mdp.n_states(), mdp.n_states()) - mdp.gamma() * p_pi;
}

inline Vector values_from_pi(const TabularMdp& mdp, const Matrix& pi) {
  const Matrix a = bellman_operator(mdp, state_transition(mdp, pi));
  const Vector r = policy_reward(mdp, pi);
  Eigen::PartialPivLU<Matrix> lu(a);
  Vector v = lu.solve(r);
  v += lu.solve(r - a * v);
  const double residual = (a * v - r).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-12 * std::max(1.0, r.cwiseAbs().maxCoeff()))) {
    throw OracleError("exact_values: residual " + std::to_string(residual) + " too large");
  }
  return v;
}

inline Matrix q_from_values(const TabularMdp& mdp, const Vector& v) {
  Matrix q(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) {
      double next = 0.0;
      for (int t = 0; t < mdp.n_states(); ++t) next += mdp.p(s, a, t) * v[t];
      q(s, a) = mdp.reward(s, a) + mdp.gamma() * next;
    }
  return q;
}

// d(s, a) = H(s) pi(a|s),  H^T = (1 - gamma) rho^T (I - gamma P_pi)^{-1}
inline Matrix visitation_from_pi(const TabularMdp& mdp, const Matrix& pi) {
  const Matrix a = bellman_operator(mdp, state_transition(mdp, pi));
  Vector h = a.transpose().partialPivLu().solve((1.0 - mdp.gamma()) * mdp.init_dist());
  h = h.cwiseMax(0.0);
  h /= h.sum();
  return h.asDiagonal() * pi;
}

template <DiscretePolicy Pol>
Vector exact_values(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  return values_from_pi(mdp, policy_matrix(mdp, policy, theta));
}

template <DiscretePolicy Pol>
Matrix exact_q(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  return q_from_values(mdp, exact_values(mdp, policy, theta));
}

template <DiscretePolicy Pol>
Matrix exact_advantage(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  const Vector v = exact_values(mdp, policy, theta);
  return q_from_values(mdp, v).colwise() - v;
}

template <DiscretePolicy Pol>
Matrix exact_visitation(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  return visitation_from_pi(mdp, policy_matrix(mdp, policy, theta));
}

// J(theta) = rho^T V_theta
template <DiscretePolicy Pol>
double objective(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  return mdp.init_dist().dot(exact_values(mdp, policy, theta));
}

// E_{d_theta}[Q psi], the expectation of the minibatch gradient estimator.
template <DiscretePolicy Pol>
Vector estimator_target(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  const Matrix pi = policy_matrix(mdp, policy, theta);
  const Matrix d = visitation_from_pi(mdp, pi);
  const Matrix q = q_from_values(mdp, values_from_pi(mdp, pi));
  Vector g = Vector::Zero(policy.dim());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      if (d(s, a) > 0.0) g += d(s, a) * q(s, a) * policy.score(theta, s, a);
  return g;
}

// grad J = E_{d_theta}[Q psi] / (1 - gamma), the policy gradient theorem.
template <DiscretePolicy Pol>
Vector analytic_gradient(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  return estimator_target(mdp, policy, theta) / (1.0 - mdp.gamma());
}

template <DiscretePolicy Pol>
Vector finite_difference_gradient(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta,
                                  double step = 1e-5) {
  Vector g(theta.dim());
  for (Eigen::Index i = 0; i < theta.dim(); ++i) {
    const Vector e = Vector::Unit(theta.dim(), i);
    g[i] = (objective(mdp, policy, theta.shifted(e, step)) - objective(mdp, policy, theta.shifted(e, -step))) /
           (2.0 * step);
  }
  return g;
}

// Central differences at h and h/2 combined to cancel the O(h^2) term.
template <DiscretePolicy Pol>
Vector richardson_gradient(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta, double step = 1e-4) {
  const Vector coarse = finite_difference_gradient(mdp, policy, theta, step);
  const Vector fine = finite_difference_gradient(mdp, policy, theta, step / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

// grad J(theta), checked against central differences of J (step 1e-5, relative
// error 1e-5) with a Richardson retry (step 1e-4, relative error 1e-4).
template <DiscretePolicy Pol>
Vector exact_gradient(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  const Vector g = analytic_gradient(mdp, policy, theta);
  const double scale = std::max(g.norm(), 1e-4);
  if ((g - finite_difference_gradient(mdp, policy, theta, 1e-5)).norm() <= 1e-5 * scale) return g;
  const double err = (g - richardson_gradient(mdp, policy, theta, 1e-4)).norm();
  if (err <= 1e-4 * scale) return g;
  throw OracleError("exact_gradient: analytic gradient disagrees with finite differences (error " +
                    std::to_string(err) + ")");
}

// K(theta) = E_{d_theta}[psi psi^T]
template <DiscretePolicy Pol>
Matrix exact_fisher(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  const Matrix d = exact_visitation(mdp, policy, theta);
  Matrix k = Matrix::Zero(policy.dim(), policy.dim());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (d(s, a) == 0.0) continue;
      const Vector psi = policy.score(theta, s, a);
      k.noalias() += d(s, a) * psi * psi.transpose();
    }
  return k;
}

// E_{d_theta} ||psi||^2
template <DiscretePolicy Pol>
double exact_psi_infty(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta) {
  const Matrix d = exact_visitation(mdp, policy, theta);
  double total = 0.0;
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      if (d(s, a) > 0.0) total += d(s, a) * policy.score(theta, s, a).squaredNorm();
  return total;
}

// Returns (J(theta1) - J(theta2), E_{d_theta1}[A_theta2] / (1 - gamma)), each
// side computed on its own.
template <DiscretePolicy Pol>
std::pair<double, double> performance_difference(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta1,
                                                 const ParamVector& theta2) {
  const double lhs = objective(mdp, policy, theta1) - objective(mdp, policy, theta2);
  const Matrix d1 = exact_visitation(mdp, policy, theta1);
  const Matrix adv2 = exact_advantage(mdp, policy, theta2);
  const double rhs = (d1.array() * adv2.array()).sum() / (1.0 - mdp.gamma());
  return {lhs, rhs};
}

// E_{d_theta}[(psi^T K^+ g - A)^2] with g = E_{d_theta}[Q psi], the gradient
// normalization under which compatible function approximation is exact.
template <DiscretePolicy Pol>
double compat_error(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta, double rank_tol = 1e-10) {
  const Matrix d = exact_visitation(mdp, policy, theta);
  const Matrix adv = exact_advantage(mdp, policy, theta);
  const Vector w = pseudo_inverse_apply(exact_fisher(mdp, policy, theta), estimator_target(mdp, policy, theta), rank_tol);
  double err = 0.0;
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (d(s, a) == 0.0) continue;
      const double gap = policy.score(theta, s, a).dot(w) - adv(s, a);
      err += d(s, a) * gap * gap;
    }
  return err;
}

// 1 + max_{s,a} d_theta1 / d_theta2; infinite on a support violation.
inline double mismatch_from_visitations(const Matrix& d1, const Matrix& d2) {
  double ratio = 0.0;
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    const double num = d1.data()[i];
    const double den = d2.data()[i];
    if (num <= 0.0) continue;
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    ratio = std::max(ratio, num / den);
  }
  return 1.0 + ratio;
}

template <DiscretePolicy Pol>
double mismatch_coefficient(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta1,
                            const ParamVector& theta2) {
  return mismatch_from_visitations(exact_visitation(mdp, policy, theta1), exact_visitation(mdp, policy, theta2));
}

// Invariant law of a row-stochastic matrix: mu^T P = mu^T, sum mu = 1.
inline Vector stationary_distribution(const Matrix& p) {
  const Eigen::Index n = p.rows();
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b[n - 1] = 1.0;
  Vector mu = a.fullPivLu().solve(b);
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

struct OracleReport {
  Vector v;
  Matrix q;
  Matrix advantage;
  Matrix visitation;
  double j_value = 0.0;
  Vector grad_j;
  Matrix fisher;
  double psi_infty = 0.0;
  double e_pi = 0.0;
  std::optional<double> d_infty_pair;
};

template <DiscretePolicy Pol>
OracleReport report(const TabularMdp& mdp, const Pol& policy, const ParamVector& theta,
                    const ParamVector* other = nullptr) {
  OracleReport r;
  r.v = exact_values(mdp, policy, theta);
  r.q = q_from_values(mdp, r.v);
  r.advantage = r.q.colwise() - r.v;
  r.visitation = exact_visitation(mdp, policy, theta);
  r.j_value = mdp.init_dist().dot(r.v);
  r.grad_j = exact_gradient(mdp, policy, theta);
  r.fisher = exact_fisher(mdp, policy, theta);
  r.psi_infty = exact_psi_infty(mdp, policy, theta);
  r.e_pi = compat_error(mdp, policy, theta);
  if (other != nullptr) r.d_infty_pair = mismatch_coefficient(mdp, policy, theta, *other);
  return r;
}

}  // namespace oracle
}  // namespace hpg
