#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "hpg/env.hpp"
#include "hpg/policy/policy.hpp"
#include "hpg/random.hpp"
#include "hpg/types.hpp"

namespace hpg {

template <class State, class Action>
struct QSample {
  State state;
  Action action;
  double v = 0.0;                   // unbiased estimate of Q_theta(state, action)
  std::int64_t tail_length = 0;     // h
  std::int64_t horizon_j = 0;       // j
  double immediate_reward = 0.0;    // r_j
};

// j ~ Geom(1 - gamma), h ~ Geom(1 - sqrt(gamma)); roll tau = j + h steps and
// return (s_j, a_j) with v = sum_{u=j}^{tau} gamma^{(u-j)/2} r_u.
template <Environment Env, Policy Pol>
auto sample_q(const Env& env, const Pol& policy, const ParamVector& theta, double gamma, Rng& rng) {
  using S = typename Env::state_type;
  using A = typename Env::action_type;
  require(gamma >= 0.0 && gamma < 1.0, "sample_q: gamma must lie in [0,1)");
  const double root = std::sqrt(gamma);
  const std::int64_t j = geom_draw(1.0 - gamma, rng);
  const std::int64_t h = geom_draw(1.0 - root, rng);
  const std::int64_t tau = j + h;

  S s = env.initial_state(rng);
  for (std::int64_t u = 0; u < j; ++u) {
    A a = policy.sample_action(theta, s, rng);
    s = env.step(s, a, rng).next;
  }
  A a = policy.sample_action(theta, s, rng);
  QSample<S, A> out{s, a, 0.0, h, j, 0.0};
  double weight = 1.0;
  for (std::int64_t u = j; u <= tau; ++u) {
    auto tr = env.step(s, a, rng);
    if (u == j) out.immediate_reward = tr.reward;
    out.v += weight * tr.reward;
    weight *= root;
    if (u == tau) break;
    s = tr.next;
    a = policy.sample_action(theta, s, rng);
  }
  return out;
}

// Batch sampling is split into fixed-size chunks, each with its own generator
// derived from one draw of the caller's rng. Results do not depend on `threads`.
struct BatchOptions {
  int threads = 1;
  int chunk = 256;
};

namespace detail {

template <class Fn>
void for_each_chunk(int batch, const BatchOptions& opts, std::uint64_t base_seed, Fn&& fn) {
  const int chunk = std::max(1, opts.chunk);
  const int n_chunks = (batch + chunk - 1) / chunk;
  auto work = [&](int c) {
    Rng rng = substream(base_seed, {static_cast<std::uint64_t>(c)});
    const int lo = c * chunk;
    const int hi = std::min(batch, lo + chunk);
    for (int i = lo; i < hi; ++i) fn(i, rng);
  };
  const int threads = std::clamp(opts.threads, 1, std::max(1, n_chunks));
  if (threads == 1) {
    for (int c = 0; c < n_chunks; ++c) work(c);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int c = t; c < n_chunks; c += threads) work(c);
    });
  }
}

}  // namespace detail

struct GradEstimate {
  Vector mean;                       // (1/B) sum_i v_i psi_i
  int batch = 0;
  std::vector<double> v;             // per-sample Q estimates
  std::vector<double> sq_norms;      // per-sample ||v_i psi_i||^2
  double mean_sq_norm = 0.0;
  double max_sq_norm = 0.0;
  double mean_reward = 0.0;          // mean of r_j over the batch
  int nondifferentiable = 0;         // samples that hit a score kink
  std::optional<double> sigma_bound; // 3 alpha sqrt(psi_inf), when psi_inf is known
};

namespace detail {
template <class Pol, class S, class A>
ScoreEval score_with_flag(const Pol& policy, const ParamVector& theta, const S& s, const A& a) {
  if constexpr (requires { policy.score_eval(theta, s, a); }) {
    return policy.score_eval(theta, s, a);
  } else {
    return {policy.score(theta, s, a), false};
  }
}
}  // namespace detail

// Minibatch estimator (1/B) sum v_i psi_theta(s_i, a_i). Its expectation is
// E_{d_theta}[Q psi] = (1 - gamma) grad J(theta).
template <Environment Env, Policy Pol>
GradEstimate estimate_gradient(const Env& env, const Pol& policy, const ParamVector& theta, double gamma, int batch,
                               Rng& rng, const BatchOptions& opts = {}) {
  require(batch >= 1, "estimate_gradient: batch size must be >= 1");
  const Eigen::Index n = policy.dim();
  Matrix products(n, batch);
  std::vector<double> v(batch), rewards(batch);
  std::vector<char> kinks(batch, 0);
  detail::for_each_chunk(batch, opts, rng(), [&](int i, Rng& sub) {
    auto q = sample_q(env, policy, theta, gamma, sub);
    const ScoreEval psi = detail::score_with_flag(policy, theta, q.state, q.action);
    products.col(i) = q.v * psi.value;
    v[i] = q.v;
    rewards[i] = q.immediate_reward;
    kinks[i] = psi.nondifferentiable ? 1 : 0;
  });

  GradEstimate g;
  g.batch = batch;
  g.mean = Vector::Zero(n);
  g.sq_norms.resize(batch);
  double reward_sum = 0.0;
  double sq_sum = 0.0;
  for (int i = 0; i < batch; ++i) {
    g.mean += products.col(i);
    g.sq_norms[i] = products.col(i).squaredNorm();
    sq_sum += g.sq_norms[i];
    g.max_sq_norm = std::max(g.max_sq_norm, g.sq_norms[i]);
    reward_sum += rewards[i];
    g.nondifferentiable += kinks[i];
  }
  g.mean /= static_cast<double>(batch);
  g.mean_sq_norm = sq_sum / batch;
  g.mean_reward = reward_sum / batch;
  g.v = std::move(v);
  return g;
}

inline bool is_symmetric(const Matrix& k, double tol = 1e-12) {
  if (k.rows() != k.cols()) return false;
  if (k.size() == 0) return true;
  return (k - k.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, k.cwiseAbs().maxCoeff());
}

struct FisherEstimate {
  Matrix matrix;          // K_t = (1/B) sum psi psi^T
  int batch = 0;
  double xi = 1.0;        // ridge parameter used with this estimate
  double max_sq_norm = 0.0;

  bool is_symmetric(double tol = 1e-12) const { return hpg::is_symmetric(matrix, tol); }
  double min_eigenvalue() const {
    if (matrix.size() == 0) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Matrix>(matrix, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  }
};

// Fisher matrix from its own visitation batch (independent of the gradient batch).
template <Environment Env, Policy Pol>
FisherEstimate estimate_fisher(const Env& env, const Pol& policy, const ParamVector& theta, double gamma, int batch,
                               Rng& rng, double xi = 1.0, const BatchOptions& opts = {}) {
  require(batch >= 1, "estimate_fisher: batch size must be >= 1");
  require(xi > 0.0 && xi <= 1.0, "estimate_fisher: xi must lie in (0,1]");
  const Eigen::Index n = policy.dim();
  Matrix scores(n, batch);
  detail::for_each_chunk(batch, opts, rng(), [&](int i, Rng& sub) {
    auto draw = sample_visitation(env, policy, theta, gamma, sub);
    scores.col(i) = policy.score(theta, draw.state, draw.action);
  });
  FisherEstimate k;
  k.batch = batch;
  k.xi = xi;
  k.matrix = Matrix::Zero(n, n);
  for (int i = 0; i < batch; ++i) {
    k.matrix.noalias() += scores.col(i) * scores.col(i).transpose();
    k.max_sq_norm = std::max(k.max_sq_norm, scores.col(i).squaredNorm());
  }
  k.matrix /= static_cast<double>(batch);
  return k;
}

// Solves (K + xi I) y = x.
inline Vector ridge_solve(const Matrix& k, double xi, const Vector& x) {
  require(xi > 0.0, "ridge_solve: xi must be positive");
  require(k.rows() == x.size(), "ridge_solve: dimension mismatch");
  require(is_symmetric(k), "ridge_solve: K is not symmetric");
  Matrix shifted = k;
  shifted.diagonal().array() += xi;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() == Eigen::Success) {
    Vector y = llt.solve(x);
    y += llt.solve(x - shifted * y);  // one refinement step
    return y;
  }
  // K slightly indefinite from roundoff; fall back to a pivoted factorization.
  Eigen::FullPivLU<Matrix> lu(shifted);
  Vector y = lu.solve(x);
  y += lu.solve(x - shifted * y);
  return y;
}

// K^+ x via eigendecomposition; eigenvalues below rank_tol * lambda_max count as zero.
inline Vector pseudo_inverse_apply(const Matrix& k, const Vector& x, double rank_tol = 1e-10) {
  require(k.rows() == x.size() && k.rows() == k.cols(), "pseudo_inverse_apply: dimension mismatch");
  if (k.size() == 0) return Vector(0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  const Vector& lambda = eig.eigenvalues();
  const double lambda_max = lambda.cwiseAbs().maxCoeff();
  Vector y = Vector::Zero(x.size());
  if (lambda_max == 0.0) return y;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > rank_tol * lambda_max) {
      const auto u = eig.eigenvectors().col(i);
      y += (u.dot(x) / lambda[i]) * u;
    }
  }
  return y;
}

// Smallest eigenvalue above rank_tol * lambda_max; zero for K = 0.
inline double smallest_nonzero_eigenvalue(const Matrix& k, double rank_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
  const Vector& lambda = eig.eigenvalues();
  const double lambda_max = lambda.cwiseAbs().maxCoeff();
  double zeta = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > rank_tol * lambda_max && (zeta == 0.0 || lambda[i] < zeta)) zeta = lambda[i];
  }
  return zeta;
}

}  // namespace hpg
