#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ivsmm/dataset.hpp"
#include "ivsmm/moments.hpp"
#include "ivsmm/rng.hpp"
#include "ivsmm/types.hpp"

namespace ivsmm {

enum class DesignKind { m1, m2, probit_late, saturated };

struct Perturbation {
  double phi_on_z1 = 0.0;  // added to the Z1 outcome coefficient
  double tau_on_z1 = 0.0;  // added to the Z1 outcome coefficient
  double tau_on_z2 = 0.0;  // added to the Z2 outcome coefficient
  bool any() const {
    return phi_on_z1 != 0.0 || tau_on_z1 != 0.0 || tau_on_z2 != 0.0;
  }
};

// A fully parameterized data-generating process.  The m1/m2 presets carry
// the published coefficient values; `saturated` is a generic builder for
// K-level designs that satisfy the chosen SMM exactly.
struct SimDesign {
  DesignKind kind = DesignKind::m1;
  Index n = 10000;
  double psi0 = 0.6;

  // m1/m2: E(Y|X,Z) = link{ b0 + (b1+psi0)X + b2 Z1 + b3 Z2 + b4 XZ1 + b5 XZ2 }
  std::array<double, 6> beta{};
  double p10 = 0.0;             // P(X=1|Z=0); P(X=1|Z=z) = p10 + 0.15 z
  std::vector<double> z_probs;  // instrument marginal
  Perturbation perturb;

  // probit_late: X = I(t_Z - V > 0), Y = I(b0 + b1 X - U > 0),
  // (U,V) standard bivariate normal with correlation rho.
  double probit_b0 = 0.0;
  double probit_b1 = 0.5;
  double rho = 0.8;
  std::vector<double> px_given_z;  // P(X=1|Z=l)

  // saturated: direct cell means E(Y|X=x,Z=z) satisfying CMI and NEM.
  SmmFamily family = SmmFamily::multiplicative;
  Matrix cell_mean;  // 2 x K
  double alpha0 = 0.19;
};

SimDesign m1_design(Index n = 10000);
SimDesign m2_design(Index n = 10000);
SimDesign probit_design(Index n = 40000);

// Generic K-level design: picks E(Y0|X=1,Z=z) = alpha0 + confounding and
// back-solves the saturated cell means so CMI and NEM hold exactly for the
// requested family.  Throws InvalidDesignError when a cell mean leaves (0,1).
SimDesign make_saturated_design(SmmFamily family, int levels,
                                std::vector<double> z_probs,
                                std::vector<double> px_given_z, double psi0,
                                double alpha0, double confounding);

// Largest deviation of the analytic E(Y0|Z=z) from alpha0; zero (to float
// error) when the design satisfies conditional mean independence.
double max_cmi_violation(const SimDesign& design);

Dataset draw(const SimDesign& design, RngStream& rng);

struct EstimatorSpec {
  std::string name = "mult-ratio";  // fit names or late/lrr/ilrr
  int steps = 2;
  bool expanded = false;
  InstrumentCoding coding = InstrumentCoding::orthogonal_indicators;
};

struct McSummary {
  std::string estimator;
  std::vector<std::string> stat_names;
  Vector mean;
  Vector sd;          // zero-size when reps_used < 2
  Vector mean_se;     // NaN entries where no SE applies
  double j_mean = std::numeric_limits<double>::quiet_NaN();
  double j_rejection_5pct = std::numeric_limits<double>::quiet_NaN();
  int reps = 0;
  int reps_used = 0;
  int failed = 0;  // non-converged or errored replications, excluded
  bool unreliable = false;  // more than 1% of replications failed
  Index n = 0;
  std::uint64_t seed = 0;
};

// Runs `reps` independent replications, one RngStream per replication keyed
// by (master_seed, replication index).  Aggregation is in replication order,
// so results are bitwise identical for any worker count.
McSummary run_replications(const SimDesign& design, const EstimatorSpec& spec,
                           int reps, Index n, std::uint64_t master_seed,
                           int workers = 0);

struct ProbitPopulation {
  Vector lrr;   // adjacent local risk ratios
  Vector tau;   // decomposition weights
  double weighted_average = 0.0;
};
ProbitPopulation probit_population_quantities(const SimDesign& design);

// Plain-text key=value serialization: kind, n, psi0, coefficient overrides,
// z_probs, perturbation.*, probit.*.
SimDesign design_from_config(const std::string& text);
std::string design_to_config(const SimDesign& design);

}  // namespace ivsmm
