#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ivsmm/dataset.hpp"
#include "ivsmm/moments.hpp"
#include "ivsmm/types.hpp"

namespace ivsmm {

struct GmmFit {
  std::string model;
  std::vector<ParamInfo> params;
  Vector theta;
  Matrix covariance;      // finite-sample: asymptotic covariance / n
  Vector std_errors;
  std::vector<std::pair<double, double>> ci95;
  int steps = 1;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;  // gbar' W^{-1} gbar at the solution
  std::optional<double> j_statistic;
  int j_df = 0;
  std::optional<double> j_pvalue;
  Matrix weight_matrix;   // W used in the final minimization
  Index n_obs = 0;
  int psi_index = -1;
  std::vector<std::string> notes;

  double psi() const { return theta[psi_index]; }
  double se_psi() const { return std_errors[psi_index]; }
};

struct JTest {
  double statistic;
  int df;
  double p_value;
};

/// gbar(theta)' W^{-1} gbar(theta); W is factorized, never inverted.
double gmm_objective(const MomentModel& model, const Vector& theta,
                     const Matrix& weight);

// One-step GMM: weight fixed at the model's instrument cross-product matrix.
// Gauss-Newton on the stacked moments with backtracking line search; sandwich
// covariance (C'W^{-1}C)^{-1} C'W^{-1} Omega W^{-1} C (C'W^{-1}C)^{-1} / n.
GmmFit fit_one_step(const MomentModel& model,
                    std::optional<Vector> theta0 = std::nullopt);

// Two-step GMM: re-weights with Omega at the one-step solution and
// re-minimizes; covariance (C' Omega^{-1} C)^{-1} / n; Hansen J available
// when over-identified.
GmmFit fit_two_step(const MomentModel& model,
                    std::optional<Vector> theta0 = std::nullopt);

GmmFit fit_gmm(const MomentModel& model, int steps,
               std::optional<Vector> theta0 = std::nullopt);

/// Hansen J from a two-step over-identified fit; NotOverIdentifiedError
/// otherwise.
JTest hansen_j(const GmmFit& fit);

/// Closed-form 2SLS for the additive SMM; identical to one-step GMM.
GmmFit fit_2sls_additive(const Dataset& ds, const InstrumentSpec& spec);

/// Generic linear 2SLS of `outcome` on (1, `regressor`) with instrument
/// matrix s (first column constant).  Returns (intercept, slope).
std::pair<double, double> two_stage_least_squares(const Vector& outcome,
                                                  const Vector& regressor,
                                                  const Matrix& s);

// Two-stage GMM for the logistic SMM: association model by maximum
// likelihood, causal moments with beta frozen, and the corrected covariance
// that folds in the first-stage sampling variability.  With steps = 2 the
// corrected matrix is also the weight, which makes the J-test valid.
GmmFit fit_2sgmm_logistic(const Dataset& ds, const InstrumentSpec& spec,
                          int steps = 2);

// How the one-step and two-step estimators combine multiple instruments:
// per-row b_i, the least-squares projection of b on S, and the per-level
// residual variances that drive the two-step reweighting.
struct EfficientCombination {
  Matrix b;               // n x 2
  Matrix coefficients;    // p x 2, regression of b on S
  Matrix one_step;        // n x 2 projection fitted values
  Matrix two_step;        // n x 2 variance-weighted combination
  Vector level_variance;  // mean nu^2 by instrument level
};
EfficientCombination efficient_combination(const MomentModel& model,
                                           const Dataset& ds,
                                           const GmmFit& fit);

// Dispatch by the CLI estimator names: additive, mult, mult-log, mult-ratio,
// logistic, logistic-2sgmm, 2sls.  `expanded` selects the expanded moment
// systems for additive/mult/logistic.
GmmFit fit_named_estimator(
    const Dataset& ds, const std::string& name, int steps,
    bool expanded = false,
    InstrumentCoding coding = InstrumentCoding::orthogonal_indicators);

}  // namespace ivsmm
