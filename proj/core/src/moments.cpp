#include "ivsmm/moments.hpp"

#include <cmath>

#include "ivsmm/errors.hpp"
#include "ivsmm/logistic.hpp"

namespace ivsmm {

namespace {

constexpr double kExpGuard = 700.0;  // e^{709} is the double boundary

void check_exponent(double t) {
  if (std::abs(t) > kExpGuard) {
    throw OverflowError(
        "exponent magnitude exceeds the double range; consider centering or "
        "scaling a continuous exposure");
  }
}

void check_instrument_variation(const Dataset& ds) {
  if (ds.n_levels < 2) {
    throw DegenerateInstrumentError(
        "instrument has a single level; no identifying variation");
  }
  const LevelStats st = level_stats(ds);
  const double spread = st.mean_x.maxCoeff() - st.mean_x.minCoeff();
  if (spread <= 1e-12 * std::max(1.0, st.mean_x.cwiseAbs().maxCoeff())) {
    throw DegenerateInstrumentError(
        "E(X|Z) is constant across instrument levels");
  }
}

std::vector<ParamInfo> with_mu_params(std::vector<ParamInfo> params,
                                      Index n_mu) {
  for (Index j = 1; j <= n_mu; ++j) {
    params.push_back({"mu" + std::to_string(j), false});
  }
  return params;
}

}  // namespace

MomentModel::MomentModel(std::string name, std::vector<ParamInfo> params,
                         Index moment_dim, Index n, Matrix s, int psi_index)
    : name_(std::move(name)),
      params_(std::move(params)),
      moment_dim_(moment_dim),
      n_(n),
      s_(std::move(s)),
      psi_index_(psi_index) {}

Vector MomentModel::mean_moments(const Vector& theta) const {
  Vector acc = Vector::Zero(moment_dim_);
  Vector g(moment_dim_);
  for (Index i = 0; i < n_; ++i) {
    g_row(theta, i, g);
    acc += g;
  }
  return acc / static_cast<double>(n_);
}

Matrix MomentModel::mean_jacobian(const Vector& theta) const {
  Matrix acc = Matrix::Zero(moment_dim_, param_dim());
  Matrix j(moment_dim_, param_dim());
  for (Index i = 0; i < n_; ++i) {
    jac_row(theta, i, j);
    acc += j;
  }
  return acc / static_cast<double>(n_);
}

Matrix MomentModel::moment_matrix(const Vector& theta) const {
  Matrix g(n_, moment_dim_);
  Vector row(moment_dim_);
  for (Index i = 0; i < n_; ++i) {
    g_row(theta, i, row);
    g.row(i) = row;
  }
  return g;
}

namespace {

// Models of the instrument form g_i = v_i(theta) * S_i, which covers the
// additive and multiplicative systems and the frozen-beta logistic system.
class ResidualSmmModel : public MomentModel {
 public:
  using MomentModel::MomentModel;

  virtual void residual(const Vector& theta, Vector& v) const = 0;
  // dv: n x param_dim, filled alongside v.
  virtual void residual_jac(const Vector& theta, Vector& v,
                            Matrix& dv) const = 0;

  void g_row(const Vector& theta, Index i,
             Eigen::Ref<Vector> out) const override {
    out = row_residual(theta, i) * s_.row(i).transpose();
  }

  void jac_row(const Vector& theta, Index i,
               Eigen::Ref<Matrix> out) const override {
    Vector dv(param_dim());
    row_residual_jac(theta, i, dv);
    out = s_.row(i).transpose() * dv.transpose();
  }

  Vector mean_moments(const Vector& theta) const override {
    Vector v(n_);
    residual(theta, v);
    return s_.transpose() * v / static_cast<double>(n_);
  }

  Matrix mean_jacobian(const Vector& theta) const override {
    Vector v(n_);
    Matrix dv(n_, param_dim());
    residual_jac(theta, v, dv);
    return s_.transpose() * dv / static_cast<double>(n_);
  }

  Matrix moment_matrix(const Vector& theta) const override {
    Vector v(n_);
    residual(theta, v);
    return v.asDiagonal() * s_;
  }

  Matrix one_step_weight() const override {
    return symmetrize(s_.transpose() * s_ / static_cast<double>(n_));
  }

 protected:
  virtual double row_residual(const Vector& theta, Index i) const = 0;
  virtual void row_residual_jac(const Vector& theta, Index i,
                                Eigen::Ref<Vector> dv) const = 0;
};

class AdditiveModel final : public ResidualSmmModel {
 public:
  AdditiveModel(const Dataset& ds, Matrix s)
      : ResidualSmmModel("additive",
                         {{"psi", false}, {"alpha0", false}}, s.cols(),
                         ds.n(), s, 0),
        y_(ds.y),
        x_(ds.x) {}

  void residual(const Vector& t, Vector& v) const override {
    v = y_ - t[0] * x_ - Vector::Constant(n_, t[1]);
  }

  void residual_jac(const Vector& t, Vector& v, Matrix& dv) const override {
    residual(t, v);
    dv.col(0) = -x_;
    dv.col(1).setConstant(-1.0);
  }

  Vector starting_values() const override {
    // 2SLS closed form; for the additive system this is already the
    // one-step solution.
    Vector t(2);
    const Matrix sts = s_.transpose() * s_;
    Eigen::LDLT<Matrix> ldlt(sts);
    if (ldlt.info() == Eigen::Success) {
      const Vector fitted = s_ * ldlt.solve(s_.transpose() * x_);
      Matrix d(n_, 2);
      d.col(0).setOnes();
      d.col(1) = fitted;
      Eigen::LDLT<Matrix> dd(d.transpose() * d);
      if (dd.info() == Eigen::Success) {
        const Vector sol = dd.solve(d.transpose() * y_);
        if (sol.allFinite()) {
          t << sol[1], sol[0];
          return t;
        }
      }
    }
    t << 0.0, y_.mean();
    return t;
  }

 protected:
  double row_residual(const Vector& t, Index i) const override {
    return y_[i] - t[0] * x_[i] - t[1];
  }
  void row_residual_jac(const Vector& /*t*/, Index i,
                        Eigen::Ref<Vector> dv) const override {
    dv[0] = -x_[i];
    dv[1] = -1.0;
  }

 private:
  Vector y_, x_;
};

class MultModel final : public ResidualSmmModel {
 public:
  MultModel(const Dataset& ds, Matrix s, MultVariant variant)
      : ResidualSmmModel(variant_name(variant), variant_params(variant),
                         s.cols(), ds.n(), s, 0),
        y_(ds.y),
        x_(ds.x),
        variant_(variant) {}

  void residual(const Vector& t, Vector& v) const override {
    guard(t);
    switch (variant_) {
      case MultVariant::mmom0:
        v = y_.array() * (-t[0] * x_.array()).exp() - t[1];
        break;
      case MultVariant::mmom1:
        v = y_.array() * (-t[0] * x_.array()).exp() - std::exp(t[1]);
        break;
      case MultVariant::mmomc:
        v = y_.array() * (-t[1] - t[0] * x_.array()).exp() - 1.0;
        break;
    }
  }

  void residual_jac(const Vector& t, Vector& v, Matrix& dv) const override {
    guard(t);
    switch (variant_) {
      case MultVariant::mmom0: {
        const auto e = (-t[0] * x_.array()).exp();
        v = y_.array() * e - t[1];
        dv.col(0) = -(x_.array() * y_.array() * e);
        dv.col(1).setConstant(-1.0);
        break;
      }
      case MultVariant::mmom1: {
        const auto e = (-t[0] * x_.array()).exp();
        v = y_.array() * e - std::exp(t[1]);
        dv.col(0) = -(x_.array() * y_.array() * e);
        dv.col(1).setConstant(-std::exp(t[1]));
        break;
      }
      case MultVariant::mmomc: {
        const auto e = (-t[1] - t[0] * x_.array()).exp();
        v = y_.array() * e - 1.0;
        dv.col(0) = -(x_.array() * y_.array() * e);
        dv.col(1) = -(y_.array() * e);
        break;
      }
    }
  }

  Vector starting_values() const override {
    const double ybar = y_.mean();
    Vector t(2);
    if (variant_ == MultVariant::mmom0) {
      t << 0.0, ybar;
      return t;
    }
    if (!(ybar > 0.0)) {
      throw Error(name_ + ": outcome mean must be positive to start at "
                          "log of the mean");
    }
    t << 0.0, std::log(ybar);
    return t;
  }

 protected:
  double row_residual(const Vector& t, Index i) const override {
    guard_row(t, i);
    switch (variant_) {
      case MultVariant::mmom0:
        return y_[i] * std::exp(-t[0] * x_[i]) - t[1];
      case MultVariant::mmom1:
        return y_[i] * std::exp(-t[0] * x_[i]) - std::exp(t[1]);
      case MultVariant::mmomc:
        return y_[i] * std::exp(-t[1] - t[0] * x_[i]) - 1.0;
    }
    return 0.0;
  }

  void row_residual_jac(const Vector& t, Index i,
                        Eigen::Ref<Vector> dv) const override {
    guard_row(t, i);
    switch (variant_) {
      case MultVariant::mmom0: {
        const double e = std::exp(-t[0] * x_[i]);
        dv[0] = -x_[i] * y_[i] * e;
        dv[1] = -1.0;
        break;
      }
      case MultVariant::mmom1: {
        const double e = std::exp(-t[0] * x_[i]);
        dv[0] = -x_[i] * y_[i] * e;
        dv[1] = -std::exp(t[1]);
        break;
      }
      case MultVariant::mmomc: {
        const double e = std::exp(-t[1] - t[0] * x_[i]);
        dv[0] = -x_[i] * y_[i] * e;
        dv[1] = -y_[i] * e;
        break;
      }
    }
  }

 private:
  static std::string variant_name(MultVariant v) {
    switch (v) {
      case MultVariant::mmom0: return "mult_mmom0";
      case MultVariant::mmom1: return "mult_mmom1";
      case MultVariant::mmomc: return "mult_mmomc";
    }
    return {};
  }

  static std::vector<ParamInfo> variant_params(MultVariant v) {
    if (v == MultVariant::mmom0) {
      return {{"psi", true}, {"alpha0", false}};
    }
    return {{"psi", true}, {"log_alpha0", true}};
  }

  void guard(const Vector& t) const {
    const double xmax = x_.cwiseAbs().maxCoeff();
    check_exponent(t[0] * xmax);
    if (variant_ != MultVariant::mmom0) {
      check_exponent(std::abs(t[1]) + std::abs(t[0]) * xmax);
    }
  }

  void guard_row(const Vector& t, Index i) const {
    check_exponent(t[0] * x_[i]);
    if (variant_ != MultVariant::mmom0) {
      check_exponent(std::abs(t[1]) + std::abs(t[0] * x_[i]));
    }
  }

  Vector y_, x_;
  MultVariant variant_;
};

std::vector<ParamInfo> association_params(Index k) {
  std::vector<ParamInfo> params;
  params.push_back({"b_const", false});
  params.push_back({"b_x", false});
  for (Index j = 1; j < k; ++j) {
    params.push_back({"b_z" + std::to_string(j), false});
  }
  for (Index j = 1; j < k; ++j) {
    params.push_back({"b_xz" + std::to_string(j), false});
  }
  return params;
}

// Stacked association and causal moments, all parameters estimated jointly.
class LogisticJointModel final : public MomentModel {
 public:
  LogisticJointModel(const Dataset& ds, Matrix s, Matrix r)
      : MomentModel("logistic_joint", joint_params(r.cols(), s.cols()),
                    r.cols() + s.cols(), ds.n(), s,
                    static_cast<int>(r.cols())),
        y_(ds.y),
        x_(ds.x),
        r_(std::move(r)) {}

  void g_row(const Vector& t, Index i, Eigen::Ref<Vector> out) const override {
    const Index b = r_.cols();
    const double xb = r_.row(i).dot(t.head(b));
    const double p = expit(xb);
    const double q = expit(xb - t[b] * x_[i]);
    out.head(b) = (y_[i] - p) * r_.row(i).transpose();
    out.tail(s_.cols()) = (q - t[b + 1]) * s_.row(i).transpose();
  }

  void jac_row(const Vector& t, Index i, Eigen::Ref<Matrix> out) const override {
    const Index b = r_.cols();
    const Index m = s_.cols();
    const double xb = r_.row(i).dot(t.head(b));
    const double p = expit(xb);
    const double q = expit(xb - t[b] * x_[i]);
    const double wp = p * (1.0 - p);
    const double wq = q * (1.0 - q);
    out.setZero();
    out.topLeftCorner(b, b) =
        -wp * (r_.row(i).transpose() * r_.row(i));
    out.bottomLeftCorner(m, b) = wq * (s_.row(i).transpose() * r_.row(i));
    out.block(b, b, m, 1) = -x_[i] * wq * s_.row(i).transpose();
    out.block(b, b + 1, m, 1) = -s_.row(i).transpose();
  }

  Vector mean_moments(const Vector& t) const override {
    const Index b = r_.cols();
    const Vector xb = r_ * t.head(b);
    Vector p(n_), q(n_);
    for (Index i = 0; i < n_; ++i) {
      p[i] = expit(xb[i]);
      q[i] = expit(xb[i] - t[b] * x_[i]);
    }
    Vector out(moment_dim_);
    out.head(b) = r_.transpose() * (y_ - p) / static_cast<double>(n_);
    out.tail(s_.cols()) =
        s_.transpose() * (q.array() - t[b + 1]).matrix() /
        static_cast<double>(n_);
    return out;
  }

  Matrix mean_jacobian(const Vector& t) const override {
    const Index b = r_.cols();
    const Index m = s_.cols();
    const Vector xb = r_ * t.head(b);
    Vector wp(n_), wq(n_);
    for (Index i = 0; i < n_; ++i) {
      const double p = expit(xb[i]);
      const double q = expit(xb[i] - t[b] * x_[i]);
      wp[i] = p * (1.0 - p);
      wq[i] = q * (1.0 - q);
    }
    const double n = static_cast<double>(n_);
    Matrix c = Matrix::Zero(moment_dim_, param_dim());
    c.topLeftCorner(b, b) = -(r_.transpose() * wp.asDiagonal() * r_) / n;
    c.bottomLeftCorner(m, b) = (s_.transpose() * wq.asDiagonal() * r_) / n;
    c.block(b, b, m, 1) =
        -(s_.transpose() * (wq.array() * x_.array()).matrix()) / n;
    c.block(b, b + 1, m, 1) = -s_.colwise().mean().transpose();
    return c;
  }

  Matrix moment_matrix(const Vector& t) const override {
    const Index b = r_.cols();
    const Vector xb = r_ * t.head(b);
    Vector up(n_), uq(n_);
    for (Index i = 0; i < n_; ++i) {
      up[i] = y_[i] - expit(xb[i]);
      uq[i] = expit(xb[i] - t[b] * x_[i]) - t[b + 1];
    }
    Matrix g(n_, moment_dim_);
    g.leftCols(b) = up.asDiagonal() * r_;
    g.rightCols(s_.cols()) = uq.asDiagonal() * s_;
    return g;
  }

  Matrix one_step_weight() const override {
    const Index b = r_.cols();
    const Index m = s_.cols();
    const double n = static_cast<double>(n_);
    Matrix w = Matrix::Zero(b + m, b + m);
    w.topLeftCorner(b, b) = r_.transpose() * r_ / n;
    w.bottomRightCorner(m, m) = s_.transpose() * s_ / n;
    return symmetrize(std::move(w));
  }

  Vector starting_values() const override {
    const LogisticFit lf = logistic_mle(r_, y_);
    Vector t(param_dim());
    t.head(r_.cols()) = lf.beta;
    t[r_.cols()] = 0.0;
    t[r_.cols() + 1] = lf.fitted.mean();
    return t;
  }

  const Matrix* association_regressors() const override { return &r_; }

  Vector association_beta(const Vector& theta) const override {
    return theta.head(r_.cols());
  }

 private:
  static std::vector<ParamInfo> joint_params(Index b, Index k) {
    std::vector<ParamInfo> params = association_params(k);
    (void)b;
    params.push_back({"psi", true});
    params.push_back({"alpha0", false});
    return params;
  }

  Vector y_, x_;
  Matrix r_;
};

// Causal moments only; association coefficients frozen at beta_hat.
class LogisticPluginModel final : public ResidualSmmModel {
 public:
  LogisticPluginModel(const Dataset& ds, Matrix s, Matrix r, Vector beta_hat)
      : ResidualSmmModel("logistic_plugin", {{"psi", true}, {"alpha0", false}},
                         s.cols(), ds.n(), s, 0),
        y_(ds.y),
        x_(ds.x),
        r_(std::move(r)),
        beta_(std::move(beta_hat)),
        xb_(r_ * beta_) {}

  void residual(const Vector& t, Vector& v) const override {
    v.resize(n_);
    for (Index i = 0; i < n_; ++i) v[i] = expit(xb_[i] - t[0] * x_[i]) - t[1];
  }

  void residual_jac(const Vector& t, Vector& v, Matrix& dv) const override {
    v.resize(n_);
    for (Index i = 0; i < n_; ++i) {
      const double q = expit(xb_[i] - t[0] * x_[i]);
      v[i] = q - t[1];
      dv(i, 0) = -x_[i] * q * (1.0 - q);
      dv(i, 1) = -1.0;
    }
  }

  Vector starting_values() const override {
    Vector fitted(n_);
    for (Index i = 0; i < n_; ++i) fitted[i] = expit(xb_[i]);
    Vector t(2);
    t << 0.0, fitted.mean();
    return t;
  }

  const Matrix* association_regressors() const override { return &r_; }
  Vector association_beta(const Vector&) const override { return beta_; }
  const Vector& frozen_beta() const { return beta_; }

 protected:
  double row_residual(const Vector& t, Index i) const override {
    return expit(xb_[i] - t[0] * x_[i]) - t[1];
  }
  void row_residual_jac(const Vector& t, Index i,
                        Eigen::Ref<Vector> dv) const override {
    const double q = expit(xb_[i] - t[0] * x_[i]);
    dv[0] = -x_[i] * q * (1.0 - q);
    dv[1] = -1.0;
  }

 private:
  Vector y_, x_;
  Matrix r_;
  Vector beta_;
  Vector xb_;
};

// Expanded moments for the separable families: the instrument means mu_j are
// estimated jointly and the centered instruments multiply the exposure-free
// transform h*(X, Y; psi).
class ExpandedModel final : public MomentModel {
 public:
  ExpandedModel(const Dataset& ds, Matrix s, SmmFamily family)
      : MomentModel(family == SmmFamily::additive ? "additive_expanded"
                                                  : "mult_expanded",
                    with_mu_params({{"psi", family != SmmFamily::additive}},
                                   s.cols() - 1),
                    2 * (s.cols() - 1), ds.n(), s, 0),
        y_(ds.y),
        x_(ds.x),
        family_(family),
        zind_(s_.rightCols(s_.cols() - 1)) {}

  void g_row(const Vector& t, Index i, Eigen::Ref<Vector> out) const override {
    const Index j = zind_.cols();
    const double h = hstar(t[0], i);
    for (Index c = 0; c < j; ++c) {
      const double centered = zind_(i, c) - t[1 + c];
      out[c] = centered;
      out[j + c] = centered * h;
    }
  }

  void jac_row(const Vector& t, Index i, Eigen::Ref<Matrix> out) const override {
    const Index j = zind_.cols();
    const double h = hstar(t[0], i);
    const double dh = dhstar(t[0], i);
    out.setZero();
    for (Index c = 0; c < j; ++c) {
      const double centered = zind_(i, c) - t[1 + c];
      out(c, 1 + c) = -1.0;
      out(j + c, 0) = centered * dh;
      out(j + c, 1 + c) = -h;
    }
  }

  Vector mean_moments(const Vector& t) const override {
    const Index j = zind_.cols();
    Vector h(n_);
    fill_h(t[0], h);
    const double n = static_cast<double>(n_);
    Vector out(2 * j);
    const Vector zbar = zind_.colwise().mean().transpose();
    const double hbar = h.mean();
    out.head(j) = zbar - t.tail(j);
    out.tail(j) = zind_.transpose() * h / n - hbar * t.tail(j);
    return out;
  }

  Matrix mean_jacobian(const Vector& t) const override {
    const Index j = zind_.cols();
    Vector h(n_), dh(n_);
    fill_h(t[0], h);
    fill_dh(t[0], dh);
    const double n = static_cast<double>(n_);
    Matrix c = Matrix::Zero(2 * j, 1 + j);
    for (Index a = 0; a < j; ++a) {
      c(a, 1 + a) = -1.0;
      c(j + a, 0) = zind_.col(a).dot(dh) / n - t[1 + a] * dh.mean();
      c(j + a, 1 + a) = -h.mean();
    }
    return c;
  }

  Matrix moment_matrix(const Vector& t) const override {
    const Index j = zind_.cols();
    Vector h(n_);
    fill_h(t[0], h);
    Matrix g(n_, 2 * j);
    for (Index c = 0; c < j; ++c) {
      g.col(c) = zind_.col(c).array() - t[1 + c];
      g.col(j + c) = g.col(c).array() * h.array();
    }
    return g;
  }

  Matrix one_step_weight() const override {
    return Matrix::Identity(moment_dim_, moment_dim_);
  }

  Vector starting_values() const override {
    Vector t(param_dim());
    t[0] = 0.0;
    t.tail(zind_.cols()) = zind_.colwise().mean().transpose();
    return t;
  }

 private:
  double hstar(double psi, Index i) const {
    if (family_ == SmmFamily::additive) return y_[i] - psi * x_[i];
    check_exponent(psi * x_[i]);
    return y_[i] * std::exp(-psi * x_[i]);
  }
  double dhstar(double psi, Index i) const {
    if (family_ == SmmFamily::additive) return -x_[i];
    return -x_[i] * y_[i] * std::exp(-psi * x_[i]);
  }
  void fill_h(double psi, Vector& h) const {
    if (family_ == SmmFamily::additive) {
      h = y_ - psi * x_;
      return;
    }
    check_exponent(psi * x_.cwiseAbs().maxCoeff());
    h = y_.array() * (-psi * x_.array()).exp();
  }
  void fill_dh(double psi, Vector& dh) const {
    if (family_ == SmmFamily::additive) {
      dh = -x_;
      return;
    }
    dh = -(x_.array() * y_.array() * (-psi * x_.array()).exp());
  }

  Vector y_, x_;
  SmmFamily family_;
  Matrix zind_;
};

// Expanded logistic system: association moments stacked with the centered
// instrument moments on q(psi; beta).
class LogisticExpandedModel final : public MomentModel {
 public:
  LogisticExpandedModel(const Dataset& ds, Matrix s, Matrix r)
      : MomentModel("logistic_expanded",
                    with_mu_params(expanded_params(s.cols()), s.cols() - 1),
                    r.cols() + 2 * (s.cols() - 1), ds.n(), s,
                    static_cast<int>(r.cols())),
        y_(ds.y),
        x_(ds.x),
        r_(std::move(r)),
        zind_(s_.rightCols(s_.cols() - 1)) {}

  void g_row(const Vector& t, Index i, Eigen::Ref<Vector> out) const override {
    const Index b = r_.cols();
    const Index j = zind_.cols();
    const double xb = r_.row(i).dot(t.head(b));
    const double p = expit(xb);
    const double q = expit(xb - t[b] * x_[i]);
    out.head(b) = (y_[i] - p) * r_.row(i).transpose();
    for (Index c = 0; c < j; ++c) {
      const double centered = zind_(i, c) - t[b + 1 + c];
      out[b + c] = centered;
      out[b + j + c] = centered * q;
    }
  }

  void jac_row(const Vector& t, Index i, Eigen::Ref<Matrix> out) const override {
    const Index b = r_.cols();
    const Index j = zind_.cols();
    const double xb = r_.row(i).dot(t.head(b));
    const double p = expit(xb);
    const double q = expit(xb - t[b] * x_[i]);
    const double wq = q * (1.0 - q);
    out.setZero();
    out.topLeftCorner(b, b) = -p * (1.0 - p) *
                              (r_.row(i).transpose() * r_.row(i));
    for (Index c = 0; c < j; ++c) {
      const double centered = zind_(i, c) - t[b + 1 + c];
      out(b + c, b + 1 + c) = -1.0;
      out.block(b + j + c, 0, 1, b) = centered * wq * r_.row(i);
      out(b + j + c, b) = -centered * x_[i] * wq;
      out(b + j + c, b + 1 + c) = -q;
    }
  }

  Matrix one_step_weight() const override {
    const Index b = r_.cols();
    const double n = static_cast<double>(n_);
    Matrix w = Matrix::Identity(moment_dim_, moment_dim_);
    w.topLeftCorner(b, b) = symmetrize(r_.transpose() * r_ / n);
    return w;
  }

  Vector starting_values() const override {
    const LogisticFit lf = logistic_mle(r_, y_);
    Vector t(param_dim());
    t.head(r_.cols()) = lf.beta;
    t[r_.cols()] = 0.0;
    t.tail(zind_.cols()) = zind_.colwise().mean().transpose();
    return t;
  }

  const Matrix* association_regressors() const override { return &r_; }
  Vector association_beta(const Vector& theta) const override {
    return theta.head(r_.cols());
  }

 private:
  static std::vector<ParamInfo> expanded_params(Index k) {
    std::vector<ParamInfo> params = association_params(k);
    params.push_back({"psi", true});
    return params;
  }

  Vector y_, x_;
  Matrix r_;
  Matrix zind_;
};

}  // namespace

Matrix association_design(const Dataset& ds, const InstrumentSpec& spec) {
  InstrumentSpec ind = spec;
  ind.mode = InstrumentCoding::orthogonal_indicators;
  const Matrix s = encode_indicators(ds, ind);
  const Index k = s.cols();
  Matrix r(ds.n(), 2 * k);
  r.col(0).setOnes();
  r.col(1) = ds.x;
  r.block(0, 2, ds.n(), k - 1) = s.rightCols(k - 1);
  r.rightCols(k - 1) = s.rightCols(k - 1).array().colwise() * ds.x.array();
  return r;
}

std::unique_ptr<MomentModel> make_additive_model(const Dataset& ds,
                                                 const InstrumentSpec& spec) {
  check_instrument_variation(ds);
  return std::make_unique<AdditiveModel>(ds, encode_indicators(ds, spec));
}

std::unique_ptr<MomentModel> make_mult_model(const Dataset& ds,
                                             const InstrumentSpec& spec,
                                             MultVariant variant) {
  check_instrument_variation(ds);
  return std::make_unique<MultModel>(ds, encode_indicators(ds, spec), variant);
}

std::unique_ptr<MomentModel> make_logistic_joint_model(
    const Dataset& ds, const InstrumentSpec& spec) {
  check_instrument_variation(ds);
  if (!is_binary01(ds.y)) {
    throw Error("logistic SMM requires a binary 0/1 outcome");
  }
  return std::make_unique<LogisticJointModel>(ds, encode_indicators(ds, spec),
                                              association_design(ds, spec));
}

std::unique_ptr<MomentModel> make_logistic_plugin_model(
    const Dataset& ds, const InstrumentSpec& spec, const Vector& beta_hat) {
  check_instrument_variation(ds);
  if (!is_binary01(ds.y)) {
    throw Error("logistic SMM requires a binary 0/1 outcome");
  }
  Matrix r = association_design(ds, spec);
  if (beta_hat.size() != r.cols()) {
    throw Error("plugin beta size does not match the association design");
  }
  return std::make_unique<LogisticPluginModel>(
      ds, encode_indicators(ds, spec), std::move(r), beta_hat);
}

std::unique_ptr<MomentModel> make_expanded_model(const Dataset& ds,
                                                 const InstrumentSpec& spec,
                                                 SmmFamily family) {
  check_instrument_variation(ds);
  const Matrix s = encode_indicators(ds, spec);
  if (s.cols() < 2) {
    throw DegenerateInstrumentError(
        "expanded moments need at least one non-constant instrument");
  }
  if (family == SmmFamily::logistic) {
    if (!is_binary01(ds.y)) {
      throw Error("logistic SMM requires a binary 0/1 outcome");
    }
    return std::make_unique<LogisticExpandedModel>(
        ds, s, association_design(ds, spec));
  }
  return std::make_unique<ExpandedModel>(ds, s, family);
}

const Vector& plugin_beta(const MomentModel& model) {
  const auto* plugin = dynamic_cast<const LogisticPluginModel*>(&model);
  if (plugin == nullptr) {
    throw Error("plugin_beta: model has no frozen association coefficients");
  }
  return plugin->frozen_beta();
}

}  // namespace ivsmm
