#include "ivsmm/logistic.hpp"

#include <cmath>

#include "ivsmm/errors.hpp"

namespace ivsmm {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double neg_loglik(const Matrix& r, const Vector& y, const Vector& beta) {
  const Vector xb = r * beta;
  double nll = 0.0;
  for (Index i = 0; i < xb.size(); ++i) nll += softplus(xb[i]) - y[i] * xb[i];
  return nll;
}

}  // namespace

LogisticFit logistic_mle(const Matrix& design, const Vector& response) {
  const Index n = design.rows();
  const Index p = design.cols();
  if (response.size() != n) {
    throw Error("logistic_mle: design and response sizes differ");
  }
  if (!is_binary01(response)) {
    throw Error("logistic_mle: response must be coded 0/1");
  }
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      throw RankDeficientError("logistic_mle: design is rank deficient");
    }
  }

  Vector beta = Vector::Zero(p);
  Vector fitted(n);
  double nll = neg_loglik(design, response, beta);
  int iter = 0;
  bool converged = false;
  for (; iter < 100; ++iter) {
    const Vector xb = design * beta;
    for (Index i = 0; i < n; ++i) fitted[i] = expit(xb[i]);
    const Vector score = design.transpose() * (response - fitted);
    if (score.cwiseAbs().maxCoeff() <= 1e-8) {
      converged = true;
      break;
    }
    const Vector w = fitted.array() * (1.0 - fitted.array());
    const Matrix hess = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success) {
      throw RankDeficientError("logistic_mle: singular information matrix");
    }
    Vector step = ldlt.solve(score);
    double scale = 1.0;
    for (int half = 0; half <= 30; ++half) {
      const Vector cand = beta + scale * step;
      const double cand_nll = neg_loglik(design, response, cand);
      if (cand_nll < nll || half == 30) {
        beta = cand;
        nll = cand_nll;
        break;
      }
      scale *= 0.5;
    }
    if (beta.cwiseAbs().maxCoeff() > 30.0) {
      throw SeparationError(
          "logistic_mle: coefficient diverged past 30, data are separated");
    }
  }
  if (!converged) {
    const Vector xb = design * beta;
    for (Index i = 0; i < n; ++i) fitted[i] = expit(xb[i]);
    const Vector score = design.transpose() * (response - fitted);
    if (score.cwiseAbs().maxCoeff() > 1e-8) {
      throw Error("logistic_mle: no convergence in 100 iterations");
    }
  }

  const Vector xb = design * beta;
  for (Index i = 0; i < n; ++i) fitted[i] = expit(xb[i]);
  const Vector w = fitted.array() * (1.0 - fitted.array());
  const Matrix info = design.transpose() * w.asDiagonal() * design;
  Eigen::LDLT<Matrix> ldlt(info);
  if (ldlt.info() != Eigen::Success) {
    throw RankDeficientError("logistic_mle: singular information at optimum");
  }
  LogisticFit fit;
  fit.beta = beta;
  fit.covariance = symmetrize(ldlt.solve(Matrix::Identity(p, p)));
  fit.fitted = fitted;
  fit.iterations = iter;
  return fit;
}

}  // namespace ivsmm
