#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "hpg/policy.hpp"

using namespace hpg;

namespace {

// Composite Simpson on [lo, hi] with n (even) panels.
double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// P(lo <= X <= hi) for the exponential-power law centred at 0, through the
// regularized incomplete gamma function: |X|^kappa ~ Gamma(1/kappa).
double gg_interval(double kappa, double lo, double hi) {
  auto cdf_abs = [kappa](double x) { return boost::math::gamma_p(1.0 / kappa, std::pow(std::abs(x), kappa)); };
  auto cdf = [&](double x) { return x >= 0.0 ? 0.5 + 0.5 * cdf_abs(x) : 0.5 - 0.5 * cdf_abs(x); };
  return cdf(hi) - cdf(lo);
}

ParamVector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return ParamVector(x);
}

}  // namespace

TEST(Softmax, UniformAtZero) {
  const auto pol = SoftmaxPolicy::tabular(3, 4);
  const ParamVector theta = ParamVector::zeros(12);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 4; ++a) EXPECT_NEAR(pol.log_density(theta, s, a), std::log(0.25), 1e-15);
}

TEST(Softmax, ScoreAtZero) {
  const auto pol = SoftmaxPolicy::tabular(2, 3);
  const Vector psi = pol.score(ParamVector::zeros(6), 1, 2);
  Vector expected = Vector::Zero(6);
  expected.segment(3, 3).setConstant(-1.0 / 3.0);
  expected[5] = 1.0 - 1.0 / 3.0;
  EXPECT_LT((psi - expected).norm(), 1e-15);
}

TEST(Softmax, ScoreMatchesFiniteDifferences) {
  const auto pol = SoftmaxPolicy::tabular(2, 3);
  const ParamVector theta = vec({0.2, -0.4, 1.1, 0.3, 0.0, -0.7});
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 3; ++a) {
      const Vector psi = pol.score(theta, s, a);
      for (Eigen::Index i = 0; i < 6; ++i) {
        const Vector e = Vector::Unit(6, i);
        const double fd =
            (pol.log_density(theta.shifted(e, 1e-6), s, a) - pol.log_density(theta.shifted(e, -1e-6), s, a)) / 2e-6;
        EXPECT_NEAR(psi[i], fd, 1e-8);
      }
    }
}

TEST(Softmax, ScoreHasZeroMean) {
  const auto pol = SoftmaxPolicy::tabular(1, 4);
  const ParamVector theta = vec({0.5, -1.0, 2.0, 0.0});
  const Vector p = pol.probabilities(theta, 0);
  Vector mean = Vector::Zero(4);
  for (int a = 0; a < 4; ++a) mean += p[a] * pol.score(theta, 0, a);
  EXPECT_LT(mean.norm(), 1e-14);
}

TEST(Softmax, SamplingFrequenciesUniform) {
  const auto pol = SoftmaxPolicy::tabular(1, 4);
  Rng rng = substream(11);
  const int n = 100000;
  std::vector<int> count(4, 0);
  for (int i = 0; i < n; ++i) ++count[pol.sample_action(ParamVector::zeros(4), 0, rng)];
  const double se = std::sqrt(0.25 * 0.75 / n);
  for (int c : count) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 3.0 * se);
}

TEST(Softmax, KlAgainstDirectSum) {
  const auto pol = SoftmaxPolicy::tabular(1, 3);
  const ParamVector t1 = vec({0.1, 0.5, -0.3});
  const ParamVector t2 = vec({-0.2, 0.4, 0.6});
  EXPECT_EQ(pol.kl_divergence(t1, t1, 0), 0.0);
  const Vector p = pol.probabilities(t1, 0);
  const Vector q = pol.probabilities(t2, 0);
  double kl = 0.0;
  for (int a = 0; a < 3; ++a) kl += p[a] * std::log(p[a] / q[a]);
  EXPECT_NEAR(pol.kl_divergence(t1, t2, 0), kl, 1e-14);
}

TEST(GeneralizedGaussian, GaussianLogDensity) {
  const auto pol = GeneralizedGaussianPolicy::location(2.0);
  EXPECT_NEAR(pol.log_density(ParamVector::scalar(0.0), 0, 0.0), -std::log(std::sqrt(std::numbers::pi)), 1e-14);
}

TEST(GeneralizedGaussian, NormalizerMatchesQuadrature) {
  for (double kappa : {1.2, 1.5, 2.0}) {
    const auto pol = GeneralizedGaussianPolicy::location(kappa);
    // Symmetric: 2 * int_0^L exp(-x^kappa) dx with L large enough that the tail is below 1e-15.
    const double l = std::pow(40.0, 1.0 / kappa);
    const double z = 2.0 * simpson([kappa](double x) { return std::exp(-std::pow(x, kappa)); }, 0.0, l, 200000);
    EXPECT_NEAR(pol.normalizer(), z, 1e-8) << "kappa " << kappa;
    EXPECT_NEAR(pol.normalizer(), 2.0 * std::tgamma(1.0 + 1.0 / kappa), 1e-14);
  }
}

TEST(GeneralizedGaussian, ScoreExamples) {
  EXPECT_NEAR(GeneralizedGaussianPolicy::location(2.0).score(ParamVector::scalar(0.5), 0, 1.5)[0], 2.0, 1e-14);
  const auto pol = GeneralizedGaussianPolicy::location(1.5);
  const ParamVector theta = ParamVector::scalar(1.0);
  const double psi = pol.score(theta, 0, 5.0)[0];
  EXPECT_NEAR(psi, 3.0, 1e-14);
  const double h = 1e-6;
  const double fd = (pol.log_density(ParamVector::scalar(1.0 + h), 0, 5.0) -
                     pol.log_density(ParamVector::scalar(1.0 - h), 0, 5.0)) /
                    (2.0 * h);
  EXPECT_NEAR(fd, psi, 1e-5 * std::abs(psi));
}

TEST(GeneralizedGaussian, KinkIsFlagged) {
  const auto pol = GeneralizedGaussianPolicy::location(1.2);
  const auto eval = pol.score_eval(ParamVector::scalar(0.3), 0, 0.3);
  EXPECT_TRUE(eval.nondifferentiable);
  EXPECT_EQ(eval.value[0], 0.0);
  EXPECT_FALSE(GeneralizedGaussianPolicy::location(2.0).score_eval(ParamVector::scalar(0.3), 0, 0.3).nondifferentiable);
}

TEST(GeneralizedGaussian, GaussianMoments) {
  const auto pol = GeneralizedGaussianPolicy::location(2.0);
  Rng rng = substream(12);
  const double theta = 0.7;
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0, sum_4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = pol.sample_action(ParamVector::scalar(theta), 0, rng) - theta;
    sum += x;
    sum_sq += x * x;
    sum_4 += x * x * x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 3.0 * std::sqrt(0.5 / n));
  // Var(X^2) = E X^4 - (E X^2)^2 = 3/4 - 1/4 for variance 1/2.
  EXPECT_NEAR(var, 0.5, 3.0 * std::sqrt(0.5 / n));
  EXPECT_NEAR(sum_4 / n, 0.75, 0.01);
}

TEST(GeneralizedGaussian, HeavierTails) {
  Rng rng = substream(13);
  const int n = 200000;
  auto tail = [&](double kappa) {
    const auto pol = GeneralizedGaussianPolicy::location(kappa);
    int count = 0;
    for (int i = 0; i < n; ++i) count += std::abs(pol.sample_action(ParamVector::scalar(0.0), 0, rng)) > 2.0;
    return static_cast<double>(count) / n;
  };
  const double heavy = tail(1.2);
  const double light = tail(2.0);
  EXPECT_GT(heavy, light);
  EXPECT_NEAR(heavy, 1.0 - gg_interval(1.2, -2.0, 2.0), 3.0 * std::sqrt(heavy * (1 - heavy) / n));
}

TEST(GeneralizedGaussian, RegionProbability) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const ParamVector zero = ParamVector::scalar(0.0);
  for (double kappa : {1.2, 2.0})
    EXPECT_NEAR(GeneralizedGaussianPolicy::location(kappa).region_probability(zero, 0, -inf, inf), 1.0, 1e-8);
  EXPECT_NEAR(GeneralizedGaussianPolicy::location(2.0).region_probability(zero, 0, -1.0, 1.0), std::erf(1.0), 1e-10);
  const double p12 = GeneralizedGaussianPolicy::location(1.2).region_probability(zero, 0, 2.9, 4.9);
  const double p2 = GeneralizedGaussianPolicy::location(2.0).region_probability(zero, 0, 2.9, 4.9);
  EXPECT_NEAR(p12, gg_interval(1.2, 2.9, 4.9), 1e-10);
  EXPECT_NEAR(p2, gg_interval(2.0, 2.9, 4.9), 1e-12);
  EXPECT_GT(p12, p2);
}

TEST(GeneralizedGaussian, KlOfGaussianIsClosedForm) {
  // Gaussians with variance 1/2: KL = (mu1 - mu2)^2.
  const auto pol = GeneralizedGaussianPolicy::location(2.0);
  EXPECT_NEAR(pol.kl_divergence(ParamVector::scalar(0.2), ParamVector::scalar(0.5), 0), 0.09, 1e-10);
  EXPECT_EQ(pol.kl_divergence(ParamVector::scalar(0.2), ParamVector::scalar(0.2), 0), 0.0);
}

TEST(GeneralizedGaussian, RejectsBadKappa) {
  EXPECT_THROW(GeneralizedGaussianPolicy::location(1.0), ValidationError);
  EXPECT_THROW(GeneralizedGaussianPolicy::location(2.5), ValidationError);
}

TEST(SafeLogBarrier, NormalizerOneDimensionClosedForm) {
  Vector phi(1);
  phi << 0.25;
  const SafeLogBarrierPolicy pol(1, phi);
  const double t = 0.4;
  const double m = 1.0 - t;
  // int_{-1}^{1} |a - phi|^{-t} da split at phi.
  const double z = (std::pow(1.25, m) + std::pow(0.75, m)) / m;
  EXPECT_NEAR(pol.moments(ParamVector::scalar(t)).normalizer, z, 1e-12);
}

TEST(SafeLogBarrier, NormalizerMatchesCartesianQuadrature) {
  Vector phi(2);
  phi << 0.3, -0.2;
  const SafeLogBarrierPolicy pol(2, phi);
  for (double t : {-0.5, 0.3}) {
    // Polar grid about the origin (the library integrates about phi_star).
    const int nr = 2000, nw = 2000;
    double z = 0.0, zlog = 0.0;
    for (int i = 0; i < nr; ++i) {
      const double r = (i + 0.5) / nr;
      for (int k = 0; k < nw; ++k) {
        const double w = 2.0 * std::numbers::pi * (k + 0.5) / nw;
        const double d = std::hypot(r * std::cos(w) - phi[0], r * std::sin(w) - phi[1]);
        const double cell = r * (1.0 / nr) * (2.0 * std::numbers::pi / nw);
        z += std::pow(d, -t) * cell;
        zlog += std::pow(d, -t) * std::log(d) * cell;
      }
    }
    const auto m = pol.moments(ParamVector::scalar(t));
    EXPECT_NEAR(m.normalizer, z, 2e-4 * z) << "theta " << t;
    EXPECT_NEAR(m.mean_log, zlog / z, 2e-3) << "theta " << t;
  }
}

TEST(SafeLogBarrier, UniformBallAtZero) {
  const SafeLogBarrierPolicy pol(2, Vector::Zero(2));
  const auto m = pol.moments(ParamVector::scalar(0.0));
  EXPECT_NEAR(m.normalizer, std::numbers::pi, 1e-10);
  // E log r for r with density 2r on [0, 1] is -1/2.
  EXPECT_NEAR(m.mean_log, -0.5, 1e-10);
}

TEST(SafeLogBarrier, ScoreMatchesFiniteDifferences) {
  Vector phi(2);
  phi << 0.1, 0.2;
  const SafeLogBarrierPolicy pol(2, phi);
  Vector a(2);
  a << -0.4, 0.5;
  const double t = -0.3, h = 1e-5;
  const double fd =
      (pol.log_density(ParamVector::scalar(t + h), 0, a) - pol.log_density(ParamVector::scalar(t - h), 0, a)) / (2 * h);
  EXPECT_NEAR(pol.score(ParamVector::scalar(t), 0, a)[0], fd, 1e-7);
}

TEST(SafeLogBarrier, SamplesStayInBallWithRightMeanLog) {
  const SafeLogBarrierPolicy pol(2, Vector::Zero(2));
  Rng rng = substream(14);
  const ParamVector theta = ParamVector::scalar(-0.5);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector a = pol.sample_action(theta, 0, rng);
    ASSERT_LE(a.squaredNorm(), 1.0);
    const double l = std::log(a.norm());
    sum += l;
    sum_sq += l * l;
  }
  const double mean = sum / n;
  // Radial density prop. to r^{1.5}: E log r = -1/2.5.
  EXPECT_NEAR(mean, -0.4, 3.0 * std::sqrt((sum_sq / n - mean * mean) / n));
  EXPECT_NEAR(pol.moments(theta).mean_log, -0.4, 1e-10);
}

TEST(SafeLogBarrier, RejectsOutOfRange) {
  const SafeLogBarrierPolicy pol(2, Vector::Zero(2));
  EXPECT_THROW(pol.moments(ParamVector::scalar(1.5)), ValidationError);
  const SafeLogBarrierPolicy line(1, Vector::Zero(1));
  EXPECT_THROW(line.moments(ParamVector::scalar(1.0)), QuadratureError);
}

TEST(SmoothnessSpec, DominantOrder) {
  const SmoothnessSpec s(2.0, 0.2);
  EXPECT_DOUBLE_EQ(s.beta0(), 0.2);
  EXPECT_DOUBLE_EQ(s.beta_max(), 0.5);
  EXPECT_DOUBLE_EQ(SoftmaxPolicy::tabular(1, 2).smoothness().beta0(), 0.5);
  EXPECT_THROW(SmoothnessSpec(0.5, 0.5), ValidationError);
}
