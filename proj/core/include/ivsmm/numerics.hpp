#pragma once

#include <functional>

#include "ivsmm/types.hpp"

namespace ivsmm {

/// Standard normal CDF, absolute error below 1e-12 everywhere.
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// Inverse standard normal CDF on (0, 1); throws std::domain_error outside.
/// Rational initial guess polished with Newton steps on normal_cdf, so the
/// round trip normal_cdf(normal_quantile(p)) = p holds to 1e-10 or better.
double normal_quantile(double p);

/// P(chi^2_df > x) via the regularized upper incomplete gamma function.
double chisq_survival(double x, int df);

/// P(U <= h, V <= k) for standard bivariate normal with correlation rho.
double bivariate_normal_cdf(double h, double k, double rho);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  Vector nodes;
  Vector weights;
};
GaussLegendre gauss_legendre(int n);

// Dense linear solves through a pivoted LU factorization.  The condition
// number is estimated from the pivot magnitudes; anything past 1e12 is
// treated as singular.  Weight-matrix inverses are never formed explicitly;
// every W^{-1} v in the estimator goes through one of these solves.
class LinearSolver {
 public:
  explicit LinearSolver(const Matrix& a);

  Vector solve(const Vector& b) const;
  Matrix solve_matrix(const Matrix& b) const;
  double condition_estimate() const { return condition_; }

  // Index of the row whose pivot is smallest, a hint at which moment or
  // instrument column caused near-singularity.
  int weakest_pivot_row() const { return weakest_row_; }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
  double condition_ = 0.0;
  int weakest_row_ = 0;
};

Vector solve_linear(const Matrix& a, const Vector& b);

/// Central-difference Jacobian with per-coordinate step
/// h_j = h_scale * max(1, |theta_j|).  Non-finite function values raise
/// NonFiniteError.
Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f,
                            const Vector& theta, double h_scale = 1e-6);

}  // namespace ivsmm
