#pragma once

#include <cmath>

#include "ivsmm/types.hpp"

namespace ivsmm {

inline double expit(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

struct LogisticFit {
  Vector beta;
  Matrix covariance;  // (sum_i p_i (1 - p_i) R_i R_i')^{-1}
  Vector fitted;      // p_i at beta
  int iterations = 0;
};

// Logistic regression by Newton-Raphson with step halving.  The score
// equations are driven to an infinity norm of 1e-8 within 100 iterations.
// A coefficient walking past |30| is declared separation; a design without
// full column rank raises RankDeficientError.
LogisticFit logistic_mle(const Matrix& design, const Vector& response);

}  // namespace ivsmm
