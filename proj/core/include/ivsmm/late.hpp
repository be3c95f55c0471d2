#pragma once

#include <string>
#include <vector>

#include "ivsmm/dataset.hpp"
#include "ivsmm/types.hpp"

namespace ivsmm {

enum class DecompositionForm { late, lrr, ilrr };

// A weighted-average decomposition over adjacent instrument increments.
// Levels are re-sorted so E(X|Z) is increasing before anything is computed;
// tied conditional means raise DegenerateIncrementError.
struct LateDecomposition {
  DecompositionForm form = DecompositionForm::late;
  std::vector<int> level_order;  // dataset levels sorted by E(X|Z)
  Vector level_probs;            // level shares in sorted order
  Vector mean_x;                 // E(X|Z) in sorted order
  Vector adjacent;               // K-1 adjacent estimates
  Vector weights;                // mu (late/ilrr) or tau (lrr)
  double weighted_average = 0.0;
  bool monotonicity_ok = true;          // strict ordering of the sort key
  bool weights_in_unit_interval = true; // every weight inside [0, 1]
  bool positivity_ok = true;            // form-specific validity condition
};

/// Adjacent Wald ratios [E(Y|Z=k)-E(Y|Z=k-1)] / [E(X|Z=k)-E(X|Z=k-1)],
/// levels sorted by E(X|Z).
Vector adjacent_wald(const Dataset& ds);

/// Anchored ratios [E(Y|Z=k)-E(Y|Z=0)] / [E(X|Z=k)-E(X|Z=0)].
Vector wald_from_base(const Dataset& ds);

/// Weights tying 2SLS to the adjacent Wald estimates; they sum to one and a
/// valid average needs each inside [0, 1].
Vector mu_weights(const Dataset& ds);

struct LambdaWeights {
  Vector weights;
  // The anchored decomposition is a proper weighted average only when
  // E(X|Z=1) > E(X); reported, never enforced.
  bool valid_average = true;
};
LambdaWeights lambda_weights(const Dataset& ds);

/// Additive decomposition: adjacent Wald estimates with mu weights.
LateDecomposition late_decomposition(const Dataset& ds);

/// Risk-ratio decomposition (binary X, Y): adjacent ratios of E(YX)
/// increments to E{Y(X-1)} increments with tau weights.
LateDecomposition lrr_decomposition(const Dataset& ds);

/// Inverse risk-ratio decomposition (binary X, Y): reciprocal adjacent
/// ratios with mu weights on the YX scale.
LateDecomposition ilrr_decomposition(const Dataset& ds);

}  // namespace ivsmm
