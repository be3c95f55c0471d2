#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ivsmm/dataset.hpp"
#include "ivsmm/types.hpp"

namespace ivsmm {

struct ParamInfo {
  std::string name;
  bool exp_scale = false;  // also report exp(estimate) with transformed CI
};

// A moment system: per-observation moment vector g_i(theta), its analytic
// Jacobian, the parameter layout and the one-step weight convention.  Models
// bind the dataset at construction and are immutable afterwards; g and jac
// are pure, so concurrent evaluation across rows or fits is safe.
class MomentModel {
 public:
  virtual ~MomentModel() = default;

  const std::string& name() const { return name_; }
  const std::vector<ParamInfo>& params() const { return params_; }
  Index param_dim() const { return static_cast<Index>(params_.size()); }
  Index moment_dim() const { return moment_dim_; }
  Index n() const { return n_; }
  Index over_id_df() const { return moment_dim_ - param_dim(); }
  int psi_index() const { return psi_index_; }

  virtual void g_row(const Vector& theta, Index i,
                     Eigen::Ref<Vector> out) const = 0;
  virtual void jac_row(const Vector& theta, Index i,
                       Eigen::Ref<Matrix> out) const = 0;

  // Batch evaluations; defaults loop over g_row/jac_row, hot models override
  // with vectorized versions.
  virtual Vector mean_moments(const Vector& theta) const;
  virtual Matrix mean_jacobian(const Vector& theta) const;
  virtual Matrix moment_matrix(const Vector& theta) const;  // n x q

  virtual Matrix one_step_weight() const = 0;
  virtual Vector starting_values() const = 0;

  // Instrument matrix S used by the causal moments (n x p).
  const Matrix& instruments() const { return s_; }

  // Saturated association regressors, for models that carry them.
  virtual const Matrix* association_regressors() const { return nullptr; }
  // Association coefficients at theta (frozen ones for the plugin model).
  virtual Vector association_beta(const Vector& /*theta*/) const {
    return Vector();
  }

 protected:
  MomentModel(std::string name, std::vector<ParamInfo> params,
              Index moment_dim, Index n, Matrix s, int psi_index);

  std::string name_;
  std::vector<ParamInfo> params_;
  Index moment_dim_;
  Index n_;
  Matrix s_;
  int psi_index_;
};

enum class MultVariant {
  mmom0,  // residual Y exp(-X psi) - alpha0
  mmom1,  // residual {Y - exp(alpha0* + X psi)} exp(-X psi)
  mmomc,  // residual {Y - exp(alpha0* + X psi)} exp(-alpha0* - X psi)
};

enum class SmmFamily { additive, multiplicative, logistic };

std::unique_ptr<MomentModel> make_additive_model(const Dataset& ds,
                                                 const InstrumentSpec& spec);
std::unique_ptr<MomentModel> make_mult_model(const Dataset& ds,
                                             const InstrumentSpec& spec,
                                             MultVariant variant);
// Joint association + causal moments; the association model is saturated in
// (X, instrument indicators, X*indicators) and works for binary or continuous
// exposure.
std::unique_ptr<MomentModel> make_logistic_joint_model(
    const Dataset& ds, const InstrumentSpec& spec);
// Causal moments only with the association coefficients frozen at beta_hat.
std::unique_ptr<MomentModel> make_logistic_plugin_model(
    const Dataset& ds, const InstrumentSpec& spec, const Vector& beta_hat);
// Expanded systems that estimate the instrument means jointly:
// (Z_j - mu_j) moments stacked with (Z_j - mu_j) h*(X, Y; psi), where h* is
// the exposure-free transform of the family.  The logistic family stacks the
// association moments as well.
std::unique_ptr<MomentModel> make_expanded_model(const Dataset& ds,
                                                 const InstrumentSpec& spec,
                                                 SmmFamily family);

// Saturated association regressors (1, X, Z_1..Z_{K-1}, X Z_1..X Z_{K-1}).
Matrix association_design(const Dataset& ds, const InstrumentSpec& spec);

// Frozen association coefficients of a plugin model (empty otherwise).
const Vector& plugin_beta(const MomentModel& model);

}  // namespace ivsmm
