#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hpg/diagnostics.hpp"
#include "hpg/policy.hpp"
#include "hpg/problems.hpp"

using namespace hpg;
using namespace hpg::diagnostics;

namespace {

// KL between two location members of the family by composite Simpson on
// [-L, L], doubling the grid until two passes agree.
double simpson_gg_kl(double kappa, double mu1, double mu2) {
  const double z = 2.0 * std::tgamma(1.0 + 1.0 / kappa);
  auto f = [&](double a) {
    const double p = std::exp(-std::pow(std::abs(a - mu1), kappa)) / z;
    return p * (std::pow(std::abs(a - mu2), kappa) - std::pow(std::abs(a - mu1), kappa));
  };
  const double lo = std::min(mu1, mu2) - 40.0, hi = std::max(mu1, mu2) + 40.0;
  double prev = 0.0;
  for (int n = 1 << 12;; n *= 2) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    const double cur = s * h / 3.0;
    if (n > (1 << 12) && std::abs(cur - prev) < 1e-12) return cur;
    prev = cur;
    if (n > (1 << 22)) return cur;
  }
}

std::vector<std::int64_t> decades(std::int64_t n_max) {
  std::vector<std::int64_t> out;
  for (std::int64_t n = 10; n <= n_max; n *= 10) out.push_back(n);
  return out;
}

}  // namespace

TEST(KlProbe, ZeroRadiusGivesZero) {
  const auto pol = SoftmaxPolicy::tabular(2, 3);
  const ParamVector theta = ParamVector::zeros(6);
  for (const auto& u : default_directions(6)) EXPECT_EQ(pol.kl_divergence(theta, theta.shifted(u, 0.0), 0), 0.0);
}

TEST(KlProbe, SoftmaxIsQuadratic) {
  const auto pol = SoftmaxPolicy::tabular(2, 3);
  Rng rng = substream(61);
  const ParamVector theta(problems::random_normal(6, rng));
  const auto rep = probe_kl_smoothness(pol, theta, default_directions(6), log_spaced(1e-3, 1e-1, 9), {0, 1});
  EXPECT_GE(rep.fitted_beta1, 1.85);
  EXPECT_LE(rep.fitted_beta1, 2.15);
  for (double kl : rep.kl_values) EXPECT_GE(kl, 0.0);
}

TEST(KlProbe, GeneralizedGaussianMatchesSimpson) {
  for (double kappa : {1.2, 1.5, 2.0}) {
    const auto pol = GeneralizedGaussianPolicy::location(kappa);
    for (double eta : {1e-2, 0.3, 1.7}) {
      const double lib = pol.kl_divergence(ParamVector::scalar(0.4), ParamVector::scalar(0.4 + eta), 0);
      EXPECT_NEAR(lib, simpson_gg_kl(kappa, 0.4, 0.4 + eta), 1e-6) << kappa << " " << eta;
    }
  }
}

TEST(ScoreProbe, HolderExponentOfGeneralizedGaussian) {
  const std::vector<Vector> dirs{Vector::Ones(1)};
  const auto radii = log_spaced(1e-3, 1e-1, 9);
  const auto mid = GeneralizedGaussianPolicy::location(1.5);
  const auto r15 = probe_score_smoothness(mid, ParamVector::scalar(0.0), dirs, radii, kink_probe_points(0.0));
  EXPECT_GE(r15.fitted_beta2, 0.35);
  EXPECT_LE(r15.fitted_beta2, 0.65);
  const auto gauss = GeneralizedGaussianPolicy::location(2.0);
  const auto r2 = probe_score_smoothness(gauss, ParamVector::scalar(0.0), dirs, radii, kink_probe_points(0.0));
  EXPECT_GE(r2.fitted_beta2, 0.9);
  EXPECT_LE(r2.fitted_beta2, 1.1);
}

TEST(ScoreProbe, RejectsBadRadii) {
  const auto pol = GeneralizedGaussianPolicy::location(1.5);
  EXPECT_THROW(probe_score_smoothness(pol, ParamVector::scalar(0.0), {Vector::Ones(1)}, {0.1, 0.01},
                                      kink_probe_points(0.0)),
               ValidationError);
}

TEST(MomentProbe, RunningMaxIsMonotone) {
  const SafeLogBarrierPolicy pol(2, Vector::Zero(2));
  Rng rng = substream(62);
  const auto rep = probe_moments(pol, ParamVector::scalar(-0.5), SingleStateEnv<Vector>(), 100000, decades(100000), rng);
  ASSERT_EQ(rep.running_max.size(), 5u);
  for (std::size_t i = 1; i < rep.running_max.size(); ++i) EXPECT_GE(rep.running_max[i], rep.running_max[i - 1]);
}

TEST(MomentProbe, SafePolicySecondMomentMatchesClosedForm) {
  // With phi_star at the centre of the disc, -log||a|| ~ Exp(2 - theta), so
  // E||psi||^2 = Var(log||a||) = 1 / (2 - theta)^2.
  const SafeLogBarrierPolicy pol(2, Vector::Zero(2));
  for (double theta : {-0.5, 0.5}) {
    Rng rng = substream(63);
    const auto rep =
        probe_moments(pol, ParamVector::scalar(theta), SingleStateEnv<Vector>(), 100000, decades(100000), rng);
    const double exact = 1.0 / ((2.0 - theta) * (2.0 - theta));
    EXPECT_NEAR(rep.running_l2.back(), exact, 0.1 * exact) << theta;
  }
}

TEST(MomentProbe, SoftmaxPlateausAtBoundedScore) {
  const auto mdp = problems::chain2();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Rng rng = substream(64);
  const ParamVector theta = ParamVector::zeros(4);
  const auto rep = probe_moments(pol, theta, mdp, 100000, decades(100000), rng, mdp.gamma());
  // Uniform two-action softmax: every score has squared norm 1/2.
  for (double m : rep.running_l2) EXPECT_NEAR(m, 0.5, 1e-12);
  for (double m : rep.running_max) EXPECT_NEAR(m, std::sqrt(0.5), 1e-12);
}

TEST(TailScan, GaussianEdgesGrowFaster) {
  const auto gauss = GeneralizedGaussianPolicy::location(2.0);
  const auto heavy = GeneralizedGaussianPolicy::location(1.2);
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-2.0 + 0.1 * i);
  Rng rng = substream(65);
  const auto scan = probe_tail_scan(gauss, heavy, ParamVector::scalar(0.0), 0, grid, 0, 4000, rng);
  // Gaussian score gap is exactly 2|theta| for every action.
  EXPECT_NEAR(scan.curve_a.back(), 4.0, 1e-9);
  EXPECT_NEAR(scan.curve_a.front(), 4.0, 1e-9);
  EXPECT_LT(scan.curve_b.back(), scan.curve_a.back());
  EXPECT_LT(scan.curve_b.front(), scan.curve_a.front());
  const std::size_t mid = grid.size() / 2;
  EXPECT_EQ(scan.curve_a[mid], 0.0);
  EXPECT_EQ(scan.curve_b[mid], 0.0);
}

TEST(Ergodicity, MixingChainDecaysAtSecondEigenvalue) {
  const auto mdp = problems::mixing_chain();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  const ParamVector theta = ParamVector::zeros(4);
  const auto rep = probe_ergodicity(mdp, pol, theta, 30);
  EXPECT_NEAR(rep.fitted_log_decay, std::log(0.4), 0.1);
  EXPECT_FALSE(rep.non_decaying);
  // rho = (1, 0) against the uniform invariant law.
  EXPECT_NEAR(rep.tv_to_limit[0], 0.5, 1e-14);
  const Matrix p = oracle::state_transition(mdp, oracle::policy_matrix(mdp, pol, theta));
  EXPECT_NEAR(second_eigenvalue_modulus(p), 0.4, 1e-12);
}

TEST(Ergodicity, StationaryStartHasNoDistance) {
  const auto mdp = make_tabular({{{0.9, 0.1}, {0.5, 0.5}}, {{0.1, 0.9}, {0.5, 0.5}}}, {{0.5, 0.0}, {0.0, 0.5}}, 0.9,
                                {0.5, 0.5}, 1.0);
  const auto rep = probe_ergodicity(mdp, SoftmaxPolicy::tabular(2, 2), ParamVector::zeros(4), 10);
  for (double tv : rep.tv_to_limit) EXPECT_LT(tv, 1e-14);
}

TEST(Ergodicity, SampledProbeAgrees) {
  const auto mdp = problems::mixing_chain();
  Rng rng = substream(66);
  const auto rep =
      probe_ergodicity_sampled(mdp, SoftmaxPolicy::tabular(2, 2), ParamVector::zeros(4), 2, 30, 200000, rng);
  EXPECT_NEAR(rep.fitted_log_decay, std::log(0.4), 0.15);
}

TEST(NoiseProbe, ZeroRewardsGiveZero) {
  const auto mdp = make_tabular({{{0.5, 0.5}, {1.0, 0.0}}, {{0.0, 1.0}, {0.5, 0.5}}}, {{0.0, 0.0}, {0.0, 0.0}}, 0.9,
                                {1.0, 0.0}, 1.0);
  Rng rng = substream(67);
  const auto rep = probe_grad_noise(mdp, SoftmaxPolicy::tabular(2, 2), ParamVector::zeros(4), 0.9, 10, 20, rng);
  EXPECT_EQ(rep.mean_sq_error, 0.0);
}

TEST(NoiseProbe, BoundHoldsAndErrorScalesWithBatch) {
  const auto mdp = problems::chain2();
  const auto pol = SoftmaxPolicy::tabular(2, 2);
  Vector th(4);
  th << 0.3, -0.3, 0.1, 0.2;
  const ParamVector theta(th);
  Rng rng = substream(68);
  const auto a = probe_grad_noise(mdp, pol, theta, mdp.gamma(), 50, 1000, rng);
  const auto b = probe_grad_noise(mdp, pol, theta, mdp.gamma(), 100, 1000, rng);
  EXPECT_LE(a.mean_sq_error, a.bound);
  EXPECT_LE(b.mean_sq_error, b.bound);
  EXPECT_NEAR(a.sigma, 3.0 * std::sqrt(a.psi_infty), 1e-15);
  const double ratio = a.mean_sq_error / b.mean_sq_error;
  EXPECT_GT(ratio, 2.0 * 0.75);
  EXPECT_LT(ratio, 2.0 * 1.25);
  EXPECT_THROW(probe_grad_noise(mdp, pol, theta, 0.5, 10, 10, rng), ValidationError);
}

TEST(Domination, TwoArmBanditHasPositiveRatios) {
  const auto mdp = problems::bandit({1.0, 0.0}, 0.5);
  const auto pol = SoftmaxPolicy::tabular(1, 2);
  Vector star(2);
  star << 8.0, -8.0;
  std::vector<ParamVector> grid;
  for (double x = -3.0; x <= 3.0; x += 0.5)
    for (double y = -3.0; y <= 3.0; y += 0.5) {
      Vector v(2);
      v << x, y;
      grid.emplace_back(v);
    }
  grid.emplace_back(star);
  const auto rep = probe_domination(mdp, pol, ParamVector(star), grid);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_EQ(rep.excluded, 1u);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) EXPECT_GT(rep.ratios[i], 0.0) << i;
  EXPECT_TRUE(std::isnan(rep.ratios.back()));
  EXPECT_TRUE(std::isfinite(rep.empirical_m));
}

TEST(Domination, TiedThreeArmBanditViolates) {
  const auto mdp = problems::tied_three_arm_bandit();
  const auto pol = problems::tied_three_arm_policy();
  std::vector<ParamVector> grid;
  for (double x = -2.0; x <= 4.0; x += 0.25) grid.push_back(ParamVector::scalar(x));
  const auto rep = probe_domination(mdp, pol, ParamVector::scalar(-10.0), grid);
  EXPECT_FALSE(rep.violations.empty());
}

TEST(FitRate, KnownSlopes) {
  std::vector<double> inv_sq, constant;
  for (int t = 1; t <= 1000; ++t) {
    inv_sq.push_back(1.0 / (static_cast<double>(t) * t));
    constant.push_back(0.7);
  }
  // Running averages of 1/t^2 behave like zeta(2) / t.
  EXPECT_NEAR(fit_rate(inv_sq, 10, 1000).slope, -1.0, 0.05);
  EXPECT_NEAR(fit_rate(constant, 10, 1000).slope, 0.0, 1e-12);
  EXPECT_THROW(fit_rate(constant, 10, 13), ValidationError);
  EXPECT_THROW(fit_rate(constant, 10, 2000), ValidationError);
}

TEST(FitLine, ExactLine) {
  const auto fit = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(fit.slope, 2.0, 1e-14);
  EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
  EXPECT_NEAR(fit_loglog({1, 10, 100}, {1, 100, 10000}).slope, 2.0, 1e-14);
}
