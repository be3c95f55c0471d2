// Test-only oracles, independent of the library implementation paths they
// check: plain quadrature, bisection and exhaustive search.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ivsmm/moments.hpp"
#include "ivsmm/numerics.hpp"
#include "ivsmm/types.hpp"

namespace oracles {

// Composite Simpson integration.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int intervals = 20000) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) {
    sum += f(a + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
  }
  return sum * h / 3.0;
}

// Standard normal CDF by integrating the density from 0.
inline double normal_cdf_by_integration(double x) {
  auto density = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
  };
  if (x < -12.0) return 0.0;
  if (x > 12.0) return 1.0;
  return 0.5 + simpson(density, 0.0, x);
}

// Quantile by bisection on the library CDF.
inline double normal_quantile_by_bisection(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ivsmm::normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Chi-square survival by integrating the density on [x, x + 200].
inline double chisq_survival_by_integration(double x, int df) {
  auto density = [df](double t) {
    const double a = 0.5 * df;
    if (t <= 0.0) return 0.0;
    return std::exp((a - 1.0) * std::log(t) - 0.5 * t - a * std::log(2.0) -
                    std::lgamma(a));
  };
  return simpson(density, x, x + 200.0, 200000);
}

// GMM objective evaluated with explicit loops and an explicit inverse-free
// solve, no shared code with the estimator.
inline double gmm_objective_by_loops(const ivsmm::MomentModel& model,
                                     const ivsmm::Vector& theta,
                                     const ivsmm::Matrix& weight) {
  const ivsmm::Index q = model.moment_dim();
  ivsmm::Vector gbar = ivsmm::Vector::Zero(q);
  ivsmm::Vector g(q);
  for (ivsmm::Index i = 0; i < model.n(); ++i) {
    model.g_row(theta, i, g);
    for (ivsmm::Index c = 0; c < q; ++c) gbar[c] += g[c];
  }
  gbar /= static_cast<double>(model.n());
  const ivsmm::Vector solved = weight.fullPivLu().solve(gbar);
  double obj = 0.0;
  for (ivsmm::Index c = 0; c < q; ++c) obj += gbar[c] * solved[c];
  return obj;
}

// Exhaustive 2-parameter grid minimizer with two refinement passes; the
// final lattice spacing is below 1e-6 in both coordinates.
struct GridResult {
  double p0 = 0.0, p1 = 0.0, value = 0.0;
};
inline GridResult grid_search_2d(
    const std::function<double(double, double)>& f, double lo0, double hi0,
    double lo1, double hi1) {
  GridResult best;
  best.value = std::numeric_limits<double>::infinity();
  auto sweep = [&](double a0, double b0, double a1, double b1, int points) {
    const double h0 = (b0 - a0) / (points - 1);
    const double h1 = (b1 - a1) / (points - 1);
    for (int i = 0; i < points; ++i) {
      for (int j = 0; j < points; ++j) {
        const double v0 = a0 + i * h0;
        const double v1 = a1 + j * h1;
        const double val = f(v0, v1);
        if (val < best.value) {
          best = {v0, v1, val};
        }
      }
    }
    return std::max(h0, h1);
  };
  double h = sweep(lo0, hi0, lo1, hi1, 2001);
  for (int pass = 0; pass < 2; ++pass) {
    h = sweep(best.p0 - 2 * h, best.p0 + 2 * h, best.p1 - 2 * h,
              best.p1 + 2 * h, 201);
  }
  if (h > 1e-6) throw std::logic_error("grid refinement too coarse");
  return best;
}

}  // namespace oracles
