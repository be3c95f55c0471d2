#include "ivsmm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ivsmm/errors.hpp"
#include "ivsmm/logistic.hpp"
#include "ivsmm/numerics.hpp"

namespace ivsmm {

namespace {

constexpr double kStepTol = 1e-10;
constexpr double kGradTol = 1e-8;
constexpr int kMaxIterations = 200;
constexpr int kMaxHalvings = 30;
constexpr int kNelderMeadBudget = 50;
constexpr double kZ975 = 1.959964;

double objective_value(const MomentModel& model, const LinearSolver& wsolve,
                       const Vector& theta, Vector* gbar_out) {
  try {
    Vector gbar = model.mean_moments(theta);
    const double q = gbar.dot(wsolve.solve(gbar));
    if (!std::isfinite(q)) return std::numeric_limits<double>::infinity();
    if (gbar_out != nullptr) *gbar_out = std::move(gbar);
    return q;
  } catch (const OverflowError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const NonFiniteError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Basic Nelder-Mead used only when a Gauss-Newton step stalls.
Vector nelder_mead(const std::function<double(const Vector&)>& f, Vector x0,
                   int max_iter) {
  const Index p = x0.size();
  std::vector<Vector> pts;
  std::vector<double> val;
  pts.reserve(p + 1);
  pts.push_back(x0);
  val.push_back(f(x0));
  for (Index j = 0; j < p; ++j) {
    Vector v = x0;
    v[j] += 0.1 * std::max(1.0, std::abs(v[j]));
    pts.push_back(v);
    val.push_back(f(v));
  }
  std::vector<std::size_t> order(pts.size());
  auto sort_order = [&] {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
  };
  for (int it = 0; it < max_iter; ++it) {
    sort_order();
    const std::size_t worst = order.back();
    const std::size_t best = order.front();
    Vector centroid = Vector::Zero(p);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(p);
    const Vector refl = centroid + (centroid - pts[worst]);
    const double frefl = f(refl);
    if (frefl < val[best]) {
      const Vector expd = centroid + 2.0 * (centroid - pts[worst]);
      const double fexpd = f(expd);
      if (fexpd < frefl) {
        pts[worst] = expd;
        val[worst] = fexpd;
      } else {
        pts[worst] = refl;
        val[worst] = frefl;
      }
    } else if (frefl < val[order[order.size() - 2]]) {
      pts[worst] = refl;
      val[worst] = frefl;
    } else {
      const Vector contr = centroid + 0.5 * (pts[worst] - centroid);
      const double fcontr = f(contr);
      if (fcontr < val[worst]) {
        pts[worst] = contr;
        val[worst] = fcontr;
      } else {
        for (std::size_t i = 1; i < order.size(); ++i) {
          pts[order[i]] = pts[best] + 0.5 * (pts[order[i]] - pts[best]);
          val[order[i]] = f(pts[order[i]]);
        }
      }
    }
  }
  sort_order();
  return pts[order.front()];
}

struct MinimizeResult {
  Vector theta;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
};

// Gauss-Newton on the moment system: solve (C'W^{-1}C) d = -C'W^{-1} gbar,
// backtrack by halving until the objective decreases, fall back to a short
// Nelder-Mead excursion when a step fails outright.
MinimizeResult minimize(const MomentModel& model, const LinearSolver& wsolve,
                        Vector theta) {
  Vector gbar;
  double q = objective_value(model, wsolve, theta, &gbar);
  if (!std::isfinite(q)) {
    throw NonFiniteError("GMM objective is not finite at the starting values");
  }
  auto plain_objective = [&](const Vector& t) {
    return objective_value(model, wsolve, t, nullptr);
  };

  MinimizeResult res;
  bool used_fallback_last = false;
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    const Matrix c = model.mean_jacobian(theta);
    const Vector wg = wsolve.solve(gbar);
    const Vector grad = 2.0 * c.transpose() * wg;
    const Matrix wc = wsolve.solve_matrix(c);
    const Matrix a = symmetrize(c.transpose() * wc);

    Vector delta;
    bool have_step = false;
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() == Eigen::Success) {
      delta = -ldlt.solve(c.transpose() * wg);
      have_step = delta.allFinite();
    }
    if (have_step && delta.cwiseAbs().maxCoeff() <= kStepTol &&
        grad.cwiseAbs().maxCoeff() <= kGradTol) {
      res.converged = true;
      break;
    }

    bool accepted = false;
    if (have_step) {
      double scale = 1.0;
      for (int half = 0; half <= kMaxHalvings; ++half) {
        const Vector cand = theta + scale * delta;
        Vector cand_gbar;
        const double cand_q = objective_value(model, wsolve, cand, &cand_gbar);
        if (cand_q < q) {
          theta = cand;
          q = cand_q;
          gbar = std::move(cand_gbar);
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
    }
    if (accepted) {
      used_fallback_last = false;
      continue;
    }
    // Step failed: small Nelder-Mead excursion, then resume Gauss-Newton.
    if (used_fallback_last) break;  // two stalls in a row, give up
    used_fallback_last = true;
    const Vector nm = nelder_mead(plain_objective, theta, kNelderMeadBudget);
    Vector nm_gbar;
    const double nm_q = objective_value(model, wsolve, nm, &nm_gbar);
    if (nm_q < q) {
      theta = nm;
      q = nm_q;
      gbar = std::move(nm_gbar);
    } else if (grad.cwiseAbs().maxCoeff() <= kGradTol) {
      res.converged = true;
      break;
    } else {
      break;
    }
  }
  res.theta = std::move(theta);
  res.iterations = iter;
  res.objective = q;
  return res;
}

void finish_inference(GmmFit& fit) {
  fit.std_errors = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.ci95.clear();
  fit.ci95.reserve(static_cast<std::size_t>(fit.theta.size()));
  for (Index j = 0; j < fit.theta.size(); ++j) {
    fit.ci95.emplace_back(fit.theta[j] - kZ975 * fit.std_errors[j],
                          fit.theta[j] + kZ975 * fit.std_errors[j]);
  }
}

GmmFit base_fit(const MomentModel& model) {
  GmmFit fit;
  fit.model = model.name();
  fit.params = model.params();
  fit.n_obs = model.n();
  fit.psi_index = model.psi_index();
  if (model.name() == "logistic_plugin") {
    fit.notes.push_back(
        "plugin SEs treat the association fit as known; inference is "
        "incorrect (conservative) without the two-stage correction");
  }
  return fit;
}

Matrix sandwich_covariance(const Matrix& c, const LinearSolver& wsolve,
                           const Matrix& omega, Index n) {
  const Matrix wc = wsolve.solve_matrix(c);
  const Matrix a = symmetrize(c.transpose() * wc);
  LinearSolver asolve(a);
  const Matrix mid = wc.transpose() * omega * wc;
  Matrix cov = asolve.solve_matrix(mid);
  cov = asolve.solve_matrix(cov.transpose());
  return symmetrize(std::move(cov)) / static_cast<double>(n);
}

Matrix efficient_covariance(const Matrix& c, const LinearSolver& osolve,
                            Index n) {
  const Matrix a = symmetrize(c.transpose() * osolve.solve_matrix(c));
  LinearSolver asolve(a);
  Matrix cov = asolve.solve_matrix(Matrix::Identity(a.rows(), a.cols()));
  return symmetrize(std::move(cov)) / static_cast<double>(n);
}

LinearSolver weight_solver(const Matrix& w, const char* what) {
  try {
    return LinearSolver(w);
  } catch (const SingularMatrixError& e) {
    // Recover the weakest pivot for the diagnostic.
    Eigen::PartialPivLU<Matrix> lu(w);
    const Vector d = lu.matrixLU().diagonal().cwiseAbs();
    Index worst = 0;
    d.minCoeff(&worst);
    throw SingularWeightError(std::string(what) +
                                  " weight matrix is singular near moment " +
                                  std::to_string(worst) + ": " + e.what(),
                              static_cast<int>(worst));
  }
}

Matrix residual_outer_product(const MomentModel& model, const Vector& theta) {
  const Matrix g = model.moment_matrix(theta);
  Matrix omega = symmetrize(g.transpose() * g / static_cast<double>(model.n()));
  for (Index j = 0; j < omega.rows(); ++j) {
    if (omega(j, j) <= 1e-14 * std::max(1.0, omega.diagonal().maxCoeff())) {
      throw SingularWeightError(
          "moment " + std::to_string(j) + " has (near) zero variance",
          static_cast<int>(j));
    }
  }
  return omega;
}

}  // namespace

double gmm_objective(const MomentModel& model, const Vector& theta,
                     const Matrix& weight) {
  if (!is_symmetric(weight, 1e-8)) {
    throw Error("gmm_objective: weight matrix is not symmetric");
  }
  LinearSolver wsolve(weight);
  const Vector gbar = model.mean_moments(theta);
  return gbar.dot(wsolve.solve(gbar));
}

GmmFit fit_one_step(const MomentModel& model, std::optional<Vector> theta0) {
  const Matrix w = model.one_step_weight();
  LinearSolver wsolve = weight_solver(w, "one-step");
  const Vector start = theta0 ? *theta0 : model.starting_values();
  if (start.size() != model.param_dim()) {
    throw Error("starting values have the wrong length");
  }
  MinimizeResult res = minimize(model, wsolve, start);

  GmmFit fit = base_fit(model);
  fit.steps = 1;
  fit.theta = res.theta;
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.objective = res.objective;
  fit.weight_matrix = w;
  const Matrix c = model.mean_jacobian(res.theta);
  const Matrix g = model.moment_matrix(res.theta);
  const Matrix omega =
      symmetrize(g.transpose() * g / static_cast<double>(model.n()));
  fit.covariance = sandwich_covariance(c, wsolve, omega, model.n());
  finish_inference(fit);
  fit.j_df = static_cast<int>(model.over_id_df());
  return fit;
}

GmmFit fit_two_step(const MomentModel& model, std::optional<Vector> theta0) {
  const Matrix w1 = model.one_step_weight();
  LinearSolver w1solve = weight_solver(w1, "one-step");
  const Vector start = theta0 ? *theta0 : model.starting_values();
  MinimizeResult step1 = minimize(model, w1solve, start);

  const Matrix omega = residual_outer_product(model, step1.theta);
  LinearSolver osolve = weight_solver(omega, "two-step");
  MinimizeResult step2 = minimize(model, osolve, step1.theta);

  GmmFit fit = base_fit(model);
  fit.steps = 2;
  fit.theta = step2.theta;
  fit.converged = step1.converged && step2.converged;
  fit.iterations = step1.iterations + step2.iterations;
  fit.objective = step2.objective;
  fit.weight_matrix = omega;
  const Matrix c2 = model.mean_jacobian(step2.theta);
  fit.covariance = efficient_covariance(c2, osolve, model.n());
  finish_inference(fit);
  fit.j_df = static_cast<int>(model.over_id_df());
  if (fit.j_df >= 1) {
    const double j = static_cast<double>(model.n()) * step2.objective;
    fit.j_statistic = j;
    fit.j_pvalue = chisq_survival(std::max(0.0, j), fit.j_df);
  }
  return fit;
}

GmmFit fit_gmm(const MomentModel& model, int steps,
               std::optional<Vector> theta0) {
  if (steps == 1) return fit_one_step(model, std::move(theta0));
  if (steps == 2) return fit_two_step(model, std::move(theta0));
  throw Error("steps must be 1 or 2");
}

JTest hansen_j(const GmmFit& fit) {
  if (fit.steps < 2) {
    throw NotOverIdentifiedError(
        "Hansen J requires a two-step fit (step-1 weighted objective)");
  }
  if (fit.j_df < 1 || !fit.j_statistic.has_value()) {
    throw NotOverIdentifiedError(
        "model is just identified; no over-identifying restrictions to test");
  }
  return {*fit.j_statistic, fit.j_df, *fit.j_pvalue};
}

std::pair<double, double> two_stage_least_squares(const Vector& outcome,
                                                  const Vector& regressor,
                                                  const Matrix& s) {
  const Index n = outcome.size();
  Matrix sts = s.transpose() * s;
  LinearSolver first_stage(sts);
  const Vector coef = first_stage.solve(s.transpose() * regressor);
  const Vector fitted = s * coef;
  const double fbar = fitted.mean();
  const double var_fitted = (fitted.array() - fbar).square().sum();
  if (var_fitted <= 1e-12 * static_cast<double>(n)) {
    throw DegenerateInstrumentError(
        "first-stage fitted values have no variance");
  }
  Matrix d(n, 2);
  d.col(0).setOnes();
  d.col(1) = fitted;
  const Matrix dtd = d.transpose() * d;
  const Vector dty = d.transpose() * outcome;
  const Vector sol = LinearSolver(dtd).solve(dty);
  return {sol[0], sol[1]};
}

GmmFit fit_2sls_additive(const Dataset& ds, const InstrumentSpec& spec) {
  auto model = make_additive_model(ds, spec);
  const Matrix& s = model->instruments();
  std::pair<double, double> ols;
  try {
    ols = two_stage_least_squares(ds.y, ds.x, s);
  } catch (const SingularMatrixError& e) {
    throw DegenerateInstrumentError(
        std::string("first-stage design is rank deficient: ") + e.what());
  }
  Vector theta(2);
  theta << ols.second, ols.first;  // model layout is (psi, alpha0)

  GmmFit fit = base_fit(*model);
  fit.model = "additive_2sls";
  fit.steps = 1;
  fit.theta = theta;
  fit.converged = true;
  fit.iterations = 0;
  const Matrix w = model->one_step_weight();
  LinearSolver wsolve = weight_solver(w, "one-step");
  fit.objective = objective_value(*model, wsolve, theta, nullptr);
  fit.weight_matrix = w;
  const Matrix c = model->mean_jacobian(theta);
  const Matrix g = model->moment_matrix(theta);
  const Matrix omega = symmetrize(g.transpose() * g /
                                  static_cast<double>(model->n()));
  fit.covariance = sandwich_covariance(c, wsolve, omega, model->n());
  finish_inference(fit);
  fit.j_df = static_cast<int>(model->over_id_df());
  return fit;
}

GmmFit fit_2sgmm_logistic(const Dataset& ds, const InstrumentSpec& spec,
                          int steps) {
  if (steps != 1 && steps != 2) throw Error("steps must be 1 or 2");
  if (!is_binary01(ds.y)) {
    throw Error("2SGMM logistic requires a binary 0/1 outcome");
  }
  if (!is_binary01(ds.x)) {
    throw Error(
        "2SGMM logistic requires a binary exposure; use the joint logistic "
        "model for a continuous exposure");
  }
  // The saturated association model needs every (X, Z) cell occupied.
  for (int xv = 0; xv <= 1; ++xv) {
    for (int l = 0; l < ds.n_levels; ++l) {
      bool seen = false;
      for (Index i = 0; i < ds.n() && !seen; ++i) {
        seen = (ds.z[i] == l && ds.x[i] == xv);
      }
      if (!seen) {
        throw SaturationFailureError(
            "empty cell X=" + std::to_string(xv) + ", Z=" + std::to_string(l) +
            "; the saturated association model is not estimable");
      }
    }
  }

  const Matrix r = association_design(ds, spec);
  const LogisticFit assoc = logistic_mle(r, ds.y);
  auto plug = make_logistic_plugin_model(ds, spec, assoc.beta);
  const Matrix& s = plug->instruments();
  const Index n = plug->n();
  const Index m = plug->moment_dim();

  const Matrix w1 = plug->one_step_weight();
  LinearSolver w1solve = weight_solver(w1, "one-step");
  MinimizeResult step1 = minimize(*plug, w1solve, plug->starting_values());

  // Corrected residual variance: moment outer product plus the first-stage
  // contribution and its cross terms.
  const Matrix g = plug->moment_matrix(step1.theta);
  const Vector xb = r * assoc.beta;
  Vector wq(n);
  for (Index i = 0; i < n; ++i) {
    const double q = expit(xb[i] - step1.theta[0] * ds.x[i]);
    wq[i] = q * (1.0 - q);
  }
  const Matrix g_beta = r.transpose() * wq.asDiagonal() * s;      // b x m
  const Vector q_resid = ds.y - assoc.fitted;
  const Matrix cross = r.transpose() * q_resid.asDiagonal() * g;  // b x m
  Matrix omega_star = g.transpose() * g;
  omega_star += g_beta.transpose() * assoc.covariance * g_beta;
  omega_star += g_beta.transpose() * assoc.covariance * cross;
  omega_star += cross.transpose() * assoc.covariance * g_beta;
  omega_star = symmetrize(std::move(omega_star)) / static_cast<double>(n);

  GmmFit fit = base_fit(*plug);
  fit.model = "logistic_2sgmm";
  fit.notes.clear();
  fit.notes.push_back(
      "SEs include the first-stage association sampling variability");
  if (steps == 1) {
    fit.steps = 1;
    fit.theta = step1.theta;
    fit.converged = step1.converged;
    fit.iterations = step1.iterations;
    fit.objective = step1.objective;
    fit.weight_matrix = w1;
    const Matrix c = plug->mean_jacobian(step1.theta);
    fit.covariance = sandwich_covariance(c, w1solve, omega_star, n);
    finish_inference(fit);
    fit.j_df = static_cast<int>(m - 2);
    return fit;
  }

  LinearSolver osolve = weight_solver(omega_star, "two-step");
  MinimizeResult step2 = minimize(*plug, osolve, step1.theta);
  fit.steps = 2;
  fit.theta = step2.theta;
  fit.converged = step1.converged && step2.converged;
  fit.iterations = step1.iterations + step2.iterations;
  fit.objective = step2.objective;
  fit.weight_matrix = omega_star;
  const Matrix c2 = plug->mean_jacobian(step2.theta);
  fit.covariance = efficient_covariance(c2, osolve, n);
  finish_inference(fit);
  fit.j_df = static_cast<int>(m - 2);
  if (fit.j_df >= 1) {
    const double j = static_cast<double>(n) * step2.objective;
    fit.j_statistic = j;
    fit.j_pvalue = chisq_survival(std::max(0.0, j), fit.j_df);
  }
  return fit;
}

EfficientCombination efficient_combination(const MomentModel& model,
                                           const Dataset& ds,
                                           const GmmFit& fit) {
  const Index n = model.n();
  const Matrix& s = model.instruments();
  const double psi = fit.theta[fit.psi_index];
  Vector bcol(n);
  Vector resid(n);
  const std::string& name = model.name();
  if (name.rfind("mult_", 0) == 0) {
    bcol = ds.x.array() * ds.y.array() * (-psi * ds.x.array()).exp();
    if (name == "mult_mmom0") {
      resid = ds.y.array() * (-psi * ds.x.array()).exp() - fit.theta[1];
    } else if (name == "mult_mmom1") {
      resid = ds.y.array() * (-psi * ds.x.array()).exp() -
              std::exp(fit.theta[1]);
    } else {
      resid =
          ds.y.array() * (-fit.theta[1] - psi * ds.x.array()).exp() - 1.0;
    }
  } else if (model.association_regressors() != nullptr) {
    const Matrix& r = *model.association_regressors();
    const Vector beta = model.association_beta(fit.theta);
    const Vector xb = r * beta;
    const double alpha = fit.theta[fit.psi_index + 1];
    for (Index i = 0; i < n; ++i) {
      const double q = expit(xb[i] - psi * ds.x[i]);
      bcol[i] = q * (1.0 - q) * ds.x[i];
      resid[i] = q - alpha;
    }
  } else {
    throw Error(
        "efficient_combination is defined for the multiplicative and "
        "logistic models");
  }

  EfficientCombination out;
  out.b.resize(n, 2);
  out.b.col(0).setOnes();
  out.b.col(1) = bcol;
  LinearSolver sts(s.transpose() * s);
  out.coefficients = sts.solve_matrix(s.transpose() * out.b);
  out.one_step = s * out.coefficients;

  const int k = ds.n_levels;
  Vector sum_v2 = Vector::Zero(k);
  Vector count = Vector::Zero(k);
  for (Index i = 0; i < n; ++i) {
    sum_v2[ds.z[i]] += resid[i] * resid[i];
    count[ds.z[i]] += 1.0;
  }
  out.level_variance = (sum_v2.array() / count.array()).matrix();
  for (int l = 0; l < k; ++l) {
    if (!(sum_v2[l] > 0.0)) {
      throw Error("residual variance is zero at instrument level " +
                  std::to_string(l));
    }
  }
  const Matrix s_ind = indicator_basis(ds);
  out.two_step =
      s_ind * sum_v2.cwiseInverse().asDiagonal() * (s_ind.transpose() * out.b);
  return out;
}

GmmFit fit_named_estimator(const Dataset& ds, const std::string& name,
                           int steps, bool expanded, InstrumentCoding coding) {
  const InstrumentSpec spec = InstrumentSpec::for_dataset(ds, coding);
  if (name == "logistic-2sgmm") {
    if (expanded) {
      throw Error("expanded moments are not defined for the 2SGMM path");
    }
    return fit_2sgmm_logistic(ds, spec, steps);
  }
  if (name == "2sls") {
    return fit_2sls_additive(ds, spec);
  }
  std::unique_ptr<MomentModel> model;
  if (name == "additive") {
    model = expanded ? make_expanded_model(ds, spec, SmmFamily::additive)
                     : make_additive_model(ds, spec);
  } else if (name == "mult" || name == "mult-log" || name == "mult-ratio") {
    if (expanded) {
      model = make_expanded_model(ds, spec, SmmFamily::multiplicative);
    } else {
      const MultVariant v = name == "mult"       ? MultVariant::mmom0
                            : name == "mult-log" ? MultVariant::mmom1
                                                 : MultVariant::mmomc;
      model = make_mult_model(ds, spec, v);
    }
  } else if (name == "logistic") {
    model = expanded ? make_expanded_model(ds, spec, SmmFamily::logistic)
                     : make_logistic_joint_model(ds, spec);
  } else {
    throw Error("unknown estimator '" + name + "'");
  }
  return fit_gmm(*model, steps);
}

}  // namespace ivsmm
