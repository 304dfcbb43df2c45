#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hpg {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  unsigned max_depth = 15;
};

// Adaptive Gauss-Kronrod (61 point) over [a, b]; either end may be infinite.
template <class F>
double integrate(F&& f, double a, double b, QuadratureOptions opts = {}) {
  if (a == b) return 0.0;
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  double error = 0.0;
  double l1 = 0.0;
  double value = 0.0;
  if (std::isfinite(a) && std::isfinite(b)) {
    // The rule weighs an unscaled local error against a tolerance scaled by the
    // interval width, so narrow intervals never terminate. Integrate on [-1, 1].
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    value = half * Rule::integrate([&](double t) { return f(mid + half * t); }, -1.0, 1.0, opts.max_depth,
                                   opts.rel_tol, &error, &l1);
    error *= std::abs(half);
    l1 *= std::abs(half);
  } else {
    value = Rule::integrate(f, a, b, opts.max_depth, opts.rel_tol, &error, &l1);
  }
  if (!std::isfinite(value)) throw QuadratureError("quadrature: non-finite result");
  // The rule reports its own error estimate; accept a generous margin over the
  // requested tolerance but refuse results that clearly did not converge.
  if (error > 1e3 * std::max(opts.rel_tol * l1, opts.abs_tol) && error > 1e-8 * std::max(1.0, l1)) {
    throw QuadratureError("quadrature: no convergence (error estimate " + std::to_string(error) + ")");
  }
  return value;
}

// Same, but split at interior breakpoints (kinks, singularities) first.
template <class F>
double integrate_piecewise(F&& f, double a, double b, std::vector<double> breaks,
                           QuadratureOptions opts = {}) {
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  double lo = a;
  for (double x : breaks) {
    if (x <= lo || x >= b) continue;
    total += integrate(f, lo, x, opts);
    lo = x;
  }
  total += integrate(f, lo, b, opts);
  return total;
}

}  // namespace hpg
