#include <gtest/gtest.h>

#include <cmath>

#include "hpg/estimators.hpp"
#include "hpg/oracle.hpp"
#include "hpg/policy.hpp"
#include "hpg/problems.hpp"

using namespace hpg;

namespace {

ParamVector random_theta(Eigen::Index n, Rng& rng) { return ParamVector(problems::random_normal(n, rng, 0.8)); }

TabularMdp zero_reward_chain() {
  return make_tabular({{{0.3, 0.7}, {0.6, 0.4}}, {{0.5, 0.5}, {0.9, 0.1}}}, {{0.0, 0.0}, {0.0, 0.0}}, 0.8, {0.4, 0.6},
                      1.0);
}

}  // namespace

TEST(ExactValues, Examples) {
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  EXPECT_EQ(oracle::exact_values(zero_reward_chain(), pol, ParamVector::zeros(4)), Vector::Zero(2));
  const auto one = make_tabular({{{1.0}}}, {{1.0}}, 0.9, {1.0}, 1.0);
  EXPECT_NEAR(oracle::exact_values(one, SoftmaxPolicy::tabular(1, 1), ParamVector::zeros(1))[0], 10.0, 1e-12);
}

TEST(ExactValues, BoundedByAlphaOverOneMinusGamma) {
  Rng rng = substream(41);
  for (int rep = 0; rep < 20; ++rep) {
    const auto mdp = problems::random_mdp(4, 3, 0.95, rng);
    const auto pol = SoftmaxPolicy::tabular(4, 3);
    const Vector v = oracle::exact_values(mdp, pol, random_theta(12, rng));
    EXPECT_LE(v.cwiseAbs().maxCoeff(), mdp.alpha() / (1.0 - mdp.gamma()) + 1e-12);
  }
}

TEST(ExactQ, GammaZeroAndBellmanResidual) {
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Rng rng = substream(42);
  const ParamVector theta = random_theta(4, rng);
  const auto mdp0 = problems::chain2(0.0);
  EXPECT_LT((oracle::exact_q(mdp0, pol, theta) - mdp0.reward_matrix()).cwiseAbs().maxCoeff(), 1e-15);

  const auto mdp = problems::chain2();
  const Matrix q = oracle::exact_q(mdp, pol, theta);
  const Vector v = oracle::exact_values(mdp, pol, theta);
  const Matrix pi = oracle::policy_matrix(mdp, pol, theta);
  for (int s = 0; s < 2; ++s) {
    EXPECT_NEAR(v[s], pi.row(s).dot(q.row(s)), 1e-12);
    for (int a = 0; a < 2; ++a) {
      double next = 0.0;
      for (int t = 0; t < 2; ++t) next += mdp.p(s, a, t) * v[t];
      EXPECT_LE(std::abs(q(s, a) - mdp.reward(s, a) - mdp.gamma() * next), 1e-12);
    }
  }
}

TEST(ExactValues, MatchMonteCarloRollouts) {
  const auto mdp = problems::chain2();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Vector th(4);
  th << 0.5, -0.5, 0.2, 0.1;
  const ParamVector theta(th);
  const Vector v = oracle::exact_values(mdp, pol, theta);
  Rng rng = substream(43);
  // Unbiased return: sum of rewards up to an independent Geom(1 - gamma) horizon.
  for (int start = 0; start < 2; ++start) {
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::int64_t horizon = geom_draw(1.0 - mdp.gamma(), rng);
      int s = start;
      double g = 0.0;
      for (std::int64_t u = 0; u <= horizon; ++u) {
        const int a = pol.sample_action(theta, s, rng);
        const auto tr = mdp.step(s, a, rng);
        g += tr.reward;
        s = tr.next;
      }
      sum += g;
      sum_sq += g * g;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, v[start], 3.0 * std::sqrt((sum_sq / n - mean * mean) / n));
  }
}

TEST(ExactVisitation, Examples) {
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Rng rng = substream(44);
  const ParamVector theta = random_theta(4, rng);
  const auto mdp0 = problems::chain2(0.0);
  const Matrix d0 = oracle::exact_visitation(mdp0, pol, theta);
  const Matrix pi = oracle::policy_matrix(mdp0, pol, theta);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(d0(s, a), mdp0.init_dist()[s] * pi(s, a), 1e-15);

  const auto uni = problems::uniform_chain(3, 2);
  const Matrix du = oracle::exact_visitation(uni, SoftmaxPolicy::tabular(3, 2), random_theta(6, rng));
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(du.row(s).sum(), 1.0 / 3.0, 1e-14);
}

TEST(ExactVisitation, MatchesSampledHistogram) {
  const auto mdp = problems::mixing_chain();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Rng rng = substream(45);
  const ParamVector theta = random_theta(4, rng);
  const Matrix d = oracle::exact_visitation(mdp, pol, theta);
  Matrix hist = Matrix::Zero(2, 2);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const auto v = sample_visitation(mdp, pol, theta, mdp.gamma(), rng);
    hist(v.state, v.action) += 1.0 / n;
  }
  EXPECT_LT(0.5 * (hist - d).cwiseAbs().sum(), 0.01);
}

TEST(ExactGradient, ZeroRewardAndStationarity) {
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Rng rng = substream(46);
  EXPECT_LT(oracle::exact_gradient(zero_reward_chain(), pol, random_theta(4, rng)).norm(), 1e-15);
  const auto bandit = problems::bandit({1.0, 0.0}, 0.5);
  const auto two = SoftmaxPolicy::tabular(1, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (double t : {1.0, 3.0, 6.0, 12.0}) {
    Vector th(2);
    th << t, -t;
    const double g = oracle::exact_gradient(bandit, two, ParamVector(th)).norm();
    EXPECT_LT(g, prev);
    prev = g;
  }
  EXPECT_LT(prev, 1e-9);
}

TEST(ExactGradient, MatchesFiniteDifferencesOnRandomMdps) {
  Rng rng = substream(47);
  for (int rep = 0; rep < 50; ++rep) {
    const auto mdp = problems::random_mdp(3, 2, 0.9, rng);
    const auto pol = SoftmaxPolicy::tabular(3, 2);
    const ParamVector theta = random_theta(6, rng);
    const Vector g = oracle::analytic_gradient(mdp, pol, theta);
    // Independent central differences of J at step 1e-5.
    Vector fd(6);
    for (int i = 0; i < 6; ++i) {
      const Vector e = Vector::Unit(6, i);
      fd[i] = (oracle::objective(mdp, pol, theta.shifted(e, 1e-5)) - oracle::objective(mdp, pol, theta.shifted(e, -1e-5))) /
              2e-5;
    }
    EXPECT_LE((g - fd).norm(), 1e-4 * std::max(g.norm(), 1e-4)) << "rep " << rep;
    EXPECT_NO_THROW(oracle::exact_gradient(mdp, pol, theta));
  }
}

TEST(ExactFisher, DeterministicLimitAndTrace) {
  const auto mdp = problems::chain2();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Vector th(4);
  th << 40.0, -40.0, -40.0, 40.0;
  EXPECT_LT(oracle::exact_fisher(mdp, pol, ParamVector(th)).norm(), 1e-30);
  Rng rng = substream(48);
  const ParamVector theta = random_theta(4, rng);
  EXPECT_NEAR(oracle::exact_fisher(mdp, pol, theta).trace(), oracle::exact_psi_infty(mdp, pol, theta), 1e-14);
}

TEST(PerformanceDifference, Identity) {
  Rng rng = substream(49);
  const auto pol = SoftmaxPolicy::tabular(3, 2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto mdp = problems::random_mdp(3, 2, 0.9, rng);
    const ParamVector t1 = random_theta(6, rng), t2 = random_theta(6, rng);
    const auto [lhs, rhs] = oracle::performance_difference(mdp, pol, t1, t2);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10);
    const auto [l0, r0] = oracle::performance_difference(mdp, pol, t1, t1);
    EXPECT_EQ(l0, 0.0);
    EXPECT_LE(std::abs(r0), 1e-13);
  }
  const auto [lz, rz] = oracle::performance_difference(zero_reward_chain(), SoftmaxPolicy::tabular(2, 2),
                                                       random_theta(4, rng), random_theta(4, rng));
  EXPECT_EQ(lz, 0.0);
  EXPECT_EQ(rz, 0.0);
}

TEST(CompatError, TabularTiedAndZeroReward) {
  const auto mdp = problems::chain2();
  Rng rng = substream(50);
  EXPECT_LE(oracle::compat_error(mdp, SoftmaxPolicy::tabular(2, 2), random_theta(4, rng)), 1e-8);
  const auto tied = problems::state_blind_policy(2, 2);
  EXPECT_GT(oracle::compat_error(mdp, tied, random_theta(2, rng)), 1e-6);
  EXPECT_EQ(oracle::compat_error(zero_reward_chain(), tied, random_theta(2, rng)), 0.0);
}

TEST(Mismatch, Examples) {
  const auto mdp = problems::chain2();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Rng rng = substream(51);
  const ParamVector t1 = random_theta(4, rng), t2 = random_theta(4, rng);
  EXPECT_DOUBLE_EQ(oracle::mismatch_coefficient(mdp, pol, t1, t1), 2.0);
  const double dinf = oracle::mismatch_coefficient(mdp, pol, t1, t2);
  EXPECT_GE(dinf, 2.0);
  EXPECT_TRUE(std::isfinite(dinf));
  const Matrix ratio = oracle::exact_visitation(mdp, pol, t1).cwiseQuotient(oracle::exact_visitation(mdp, pol, t2));
  EXPECT_DOUBLE_EQ(dinf, 1.0 + ratio.maxCoeff());
  Matrix d1 = Matrix::Constant(1, 2, 0.5), d2(1, 2);
  d2 << 1.0, 0.0;
  EXPECT_TRUE(std::isinf(oracle::mismatch_from_visitations(d1, d2)));
}

TEST(Stationary, MatchesEigenvector) {
  Matrix p(2, 2);
  p << 0.7, 0.3, 0.3, 0.7;
  const Vector mu = oracle::stationary_distribution(p);
  EXPECT_NEAR(mu[0], 0.5, 1e-14);
  Matrix q(2, 2);
  q << 0.9, 0.1, 0.4, 0.6;
  const Vector nu = oracle::stationary_distribution(q);
  EXPECT_NEAR(nu[0], 0.8, 1e-14);
}

TEST(Report, AssemblesEverything) {
  const auto mdp = problems::chain2();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  const ParamVector theta = ParamVector::zeros(4);
  const auto rep = oracle::report(mdp, pol, theta, &theta);
  EXPECT_NEAR(rep.j_value, 5.0, 1e-12);
  EXPECT_NEAR(rep.grad_j[0], 1.25, 1e-12);
  EXPECT_NEAR(rep.psi_infty, rep.fisher.trace(), 1e-14);
  ASSERT_TRUE(rep.d_infty_pair.has_value());
  EXPECT_DOUBLE_EQ(*rep.d_infty_pair, 2.0);
}
