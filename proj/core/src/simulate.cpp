#include "ivsmm/simulate.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "ivsmm/errors.hpp"
#include "ivsmm/estimator.hpp"
#include "ivsmm/late.hpp"
#include "ivsmm/logistic.hpp"
#include "ivsmm/numerics.hpp"

namespace ivsmm {

namespace {

constexpr double kCmiCheckTol = 1e-3;

double logit(double p) { return std::log(p / (1.0 - p)); }

// Saturated outcome cell means E(Y|X=x, Z=z) for the m1/m2 designs,
// perturbations applied to the Z coefficients.
Matrix mz_cell_means(const SimDesign& d) {
  const double b2 = d.beta[2] + d.perturb.phi_on_z1 + d.perturb.tau_on_z1;
  const double b3 = d.beta[3] + d.perturb.tau_on_z2;
  Matrix cell(2, 3);
  for (int x = 0; x <= 1; ++x) {
    for (int z = 0; z < 3; ++z) {
      const double z1 = z == 1 ? 1.0 : 0.0;
      const double z2 = z == 2 ? 1.0 : 0.0;
      const double lin = d.beta[0] + (d.beta[1] + d.psi0) * x + b2 * z1 +
                         b3 * z2 + d.beta[4] * x * z1 + d.beta[5] * x * z2;
      cell(x, z) = d.kind == DesignKind::m1 ? std::exp(lin) : expit(lin);
    }
  }
  return cell;
}

void check_cell_means(const Matrix& cell) {
  for (Index x = 0; x < cell.rows(); ++x) {
    for (Index z = 0; z < cell.cols(); ++z) {
      if (!(cell(x, z) > 0.0 && cell(x, z) < 1.0)) {
        throw InvalidDesignError(
            "conditional mean outside (0,1) at cell X=" + std::to_string(x) +
            ", Z=" + std::to_string(z));
      }
    }
  }
}

std::vector<double> px_levels(const SimDesign& d) {
  switch (d.kind) {
    case DesignKind::m1:
    case DesignKind::m2: {
      std::vector<double> px(3);
      for (int z = 0; z < 3; ++z) px[z] = d.p10 + 0.15 * z;
      return px;
    }
    case DesignKind::probit_late:
      return d.px_given_z;
    case DesignKind::saturated: {
      std::vector<double> px(static_cast<std::size_t>(d.cell_mean.cols()));
      for (std::size_t z = 0; z < px.size(); ++z) px[z] = d.px_given_z[z];
      return px;
    }
  }
  return {};
}

struct RepOutcome {
  bool ok = false;
  std::string error;
  Vector stats;
  Vector se;     // empty for decompositions
  double j = std::numeric_limits<double>::quiet_NaN();
  double jp = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> names;
};

RepOutcome run_one(const SimDesign& design, const EstimatorSpec& spec,
                   const Dataset& ds) {
  (void)design;
  RepOutcome out;
  if (spec.name == "late" || spec.name == "lrr" || spec.name == "ilrr") {
    LateDecomposition d = spec.name == "late"  ? late_decomposition(ds)
                          : spec.name == "lrr" ? lrr_decomposition(ds)
                                               : ilrr_decomposition(ds);
    const Index k = d.adjacent.size();
    out.stats.resize(2 * k + 1);
    out.stats.head(k) = d.adjacent;
    out.stats[k] = d.weighted_average;
    out.stats.tail(k) = d.weights;
    const char* est = spec.name == "late"  ? "wald"
                      : spec.name == "lrr" ? "lrr"
                                           : "ilrr";
    const char* wt = spec.name == "lrr" ? "tau" : "mu";
    for (Index j = 1; j <= k; ++j) {
      out.names.push_back(std::string(est) + "_" + std::to_string(j) + "_" +
                          std::to_string(j - 1));
    }
    out.names.push_back("weighted_average");
    for (Index j = 1; j <= k; ++j) {
      out.names.push_back(std::string(wt) + std::to_string(j));
    }
    out.ok = true;
    return out;
  }
  GmmFit fit =
      fit_named_estimator(ds, spec.name, spec.steps, spec.expanded, spec.coding);
  if (!fit.converged) {
    out.error = "estimator did not converge";
    return out;
  }
  out.stats = fit.theta;
  out.se = fit.std_errors;
  for (const ParamInfo& p : fit.params) out.names.push_back(p.name);
  if (fit.j_statistic) {
    out.j = *fit.j_statistic;
    out.jp = *fit.j_pvalue;
  }
  out.ok = true;
  return out;
}

}  // namespace

SimDesign m1_design(Index n) {
  SimDesign d;
  d.kind = DesignKind::m1;
  d.n = n;
  d.psi0 = 0.6;
  d.beta = {-1.6976, 0.15, -0.3186, 0.2511, 0.6, -0.6};
  d.p10 = 0.2321;
  d.z_probs = {0.5, 0.3, 0.2};
  d.alpha0 = 0.19;
  if (max_cmi_violation(d) > kCmiCheckTol) {
    throw InvalidDesignError("m1 coefficients violate the CMI restriction");
  }
  return d;
}

SimDesign m2_design(Index n) {
  SimDesign d;
  d.kind = DesignKind::m2;
  d.n = n;
  d.psi0 = 0.6;
  d.beta = {-1.518, 0.15, 0.3183, -0.5202, -0.6, 0.6};
  d.p10 = 0.4404;
  d.z_probs = {0.5, 0.3, 0.2};
  d.alpha0 = 0.19;
  if (max_cmi_violation(d) > kCmiCheckTol) {
    throw InvalidDesignError("m2 coefficients violate the CMI restriction");
  }
  return d;
}

SimDesign probit_design(Index n) {
  SimDesign d;
  d.kind = DesignKind::probit_late;
  d.n = n;
  d.probit_b0 = normal_quantile(0.4);
  d.probit_b1 = 0.5;
  d.rho = 0.8;
  d.z_probs = {0.25, 0.25, 0.25, 0.25};
  d.px_given_z = {0.1, 0.2, 0.3, 0.4};
  return d;
}

SimDesign make_saturated_design(SmmFamily family, int levels,
                                std::vector<double> z_probs,
                                std::vector<double> px_given_z, double psi0,
                                double alpha0, double confounding) {
  if (levels < 2 ||
      static_cast<int>(z_probs.size()) != levels ||
      static_cast<int>(px_given_z.size()) != levels) {
    throw InvalidDesignError("saturated design: inconsistent level count");
  }
  SimDesign d;
  d.kind = DesignKind::saturated;
  d.family = family;
  d.psi0 = psi0;
  d.alpha0 = alpha0;
  d.z_probs = std::move(z_probs);
  d.px_given_z = std::move(px_given_z);
  d.cell_mean.resize(2, levels);
  for (int z = 0; z < levels; ++z) {
    const double pz = d.px_given_z[static_cast<std::size_t>(z)];
    if (!(pz > 0.0 && pz < 1.0)) {
      throw InvalidDesignError("saturated design: P(X=1|Z) outside (0,1)");
    }
    // Exposure-free means by arm: mixture equals alpha0 at every level.
    const double a1 = alpha0 + confounding;
    const double a0 = alpha0 - pz * confounding / (1.0 - pz);
    double treated = 0.0;
    switch (family) {
      case SmmFamily::additive:
        treated = a1 + psi0;
        break;
      case SmmFamily::multiplicative:
        treated = a1 * std::exp(psi0);
        break;
      case SmmFamily::logistic:
        treated = expit(logit(a1) + psi0);
        break;
    }
    d.cell_mean(0, z) = a0;
    d.cell_mean(1, z) = treated;
  }
  check_cell_means(d.cell_mean);
  return d;
}

double max_cmi_violation(const SimDesign& d) {
  if (d.kind == DesignKind::probit_late) return 0.0;
  Matrix cell;
  std::vector<double> px = px_levels(d);
  SmmFamily family = SmmFamily::multiplicative;
  if (d.kind == DesignKind::saturated) {
    cell = d.cell_mean;
    family = d.family;
  } else {
    cell = mz_cell_means(d);
    family = d.kind == DesignKind::m1 ? SmmFamily::multiplicative
                                      : SmmFamily::logistic;
  }
  const int k = static_cast<int>(cell.cols());
  Vector ey0(k);
  for (int z = 0; z < k; ++z) {
    double treated_free = 0.0;
    switch (family) {
      case SmmFamily::additive:
        treated_free = cell(1, z) - d.psi0;
        break;
      case SmmFamily::multiplicative:
        treated_free = cell(1, z) * std::exp(-d.psi0);
        break;
      case SmmFamily::logistic:
        treated_free = expit(logit(cell(1, z)) - d.psi0);
        break;
    }
    ey0[z] = (1.0 - px[static_cast<std::size_t>(z)]) * cell(0, z) +
             px[static_cast<std::size_t>(z)] * treated_free;
  }
  double pbar = 0.0;
  for (int z = 0; z < k; ++z) pbar += d.z_probs[static_cast<std::size_t>(z)];
  double mean = 0.0;
  for (int z = 0; z < k; ++z) {
    mean += d.z_probs[static_cast<std::size_t>(z)] / pbar * ey0[z];
  }
  return (ey0.array() - mean).abs().maxCoeff();
}

Dataset draw(const SimDesign& design, RngStream& rng) {
  const Index n = design.n;
  if (n < 1) throw InvalidDesignError("draw: sample size must be positive");
  Vector y(n), x(n);
  IntVector z(n);

  if (design.kind == DesignKind::probit_late) {
    const int k = static_cast<int>(design.z_probs.size());
    Vector thresh(k);
    for (int l = 0; l < k; ++l) {
      thresh[l] = normal_quantile(design.px_given_z[static_cast<std::size_t>(l)]);
    }
    for (Index i = 0; i < n; ++i) {
      const int zi = rng.categorical(design.z_probs);
      const auto [u, v] = rng.bivariate_normal(design.rho);
      const double xi = v < thresh[zi] ? 1.0 : 0.0;
      const double yi = u < design.probit_b0 + design.probit_b1 * xi ? 1.0 : 0.0;
      z[i] = zi;
      x[i] = xi;
      y[i] = yi;
    }
    return make_dataset(std::move(y), std::move(x), std::move(z));
  }

  const Matrix cell = design.kind == DesignKind::saturated
                          ? design.cell_mean
                          : mz_cell_means(design);
  check_cell_means(cell);
  const std::vector<double> px = px_levels(design);
  for (double p : px) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidDesignError("P(X=1|Z) outside [0,1]");
    }
  }
  for (Index i = 0; i < n; ++i) {
    const int zi = rng.categorical(design.z_probs);
    const double xi =
        rng.bernoulli(px[static_cast<std::size_t>(zi)]) ? 1.0 : 0.0;
    const double yi =
        rng.bernoulli(cell(static_cast<Index>(xi), zi)) ? 1.0 : 0.0;
    z[i] = zi;
    x[i] = xi;
    y[i] = yi;
  }
  return make_dataset(std::move(y), std::move(x), std::move(z));
}

McSummary run_replications(const SimDesign& design, const EstimatorSpec& spec,
                           int reps, Index n, std::uint64_t master_seed,
                           int workers) {
  if (reps < 1) throw Error("run_replications: reps must be >= 1");
  SimDesign d = design;
  d.n = n;
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
  }
  workers = std::min(workers, reps);

  std::vector<RepOutcome> results(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) break;
      RepOutcome& out = results[static_cast<std::size_t>(r)];
      try {
        RngStream rng(master_seed, static_cast<std::uint64_t>(r));
        const Dataset ds = draw(d, rng);
        out = run_one(d, spec, ds);
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  McSummary summary;
  summary.estimator = spec.name;
  summary.reps = reps;
  summary.n = n;
  summary.seed = master_seed;

  Index dim = -1;
  for (const RepOutcome& r : results) {
    if (r.ok) {
      dim = r.stats.size();
      summary.stat_names = r.names;
      break;
    }
  }
  if (dim < 0) {
    throw Error("all replications failed; first error: " + results[0].error);
  }
  Vector sum = Vector::Zero(dim);
  Vector sumsq = Vector::Zero(dim);
  Vector sum_se = Vector::Zero(dim);
  bool have_se = false;
  double j_sum = 0.0;
  int j_count = 0;
  int j_reject = 0;
  int used = 0;
  for (const RepOutcome& r : results) {
    if (!r.ok) {
      ++summary.failed;
      continue;
    }
    ++used;
    sum += r.stats;
    sumsq += r.stats.cwiseProduct(r.stats);
    if (r.se.size() == dim) {
      sum_se += r.se;
      have_se = true;
    }
    if (std::isfinite(r.j)) {
      j_sum += r.j;
      ++j_count;
      if (r.jp < 0.05) ++j_reject;
    }
  }
  summary.reps_used = used;
  summary.unreliable = summary.failed > 0.01 * reps;
  const double un = static_cast<double>(used);
  summary.mean = sum / un;
  if (used >= 2) {
    summary.sd = ((sumsq - un * summary.mean.cwiseProduct(summary.mean)) /
                  (un - 1.0))
                     .cwiseMax(0.0)
                     .cwiseSqrt();
  }
  if (have_se) {
    summary.mean_se = sum_se / un;
  } else {
    summary.mean_se =
        Vector::Constant(dim, std::numeric_limits<double>::quiet_NaN());
  }
  if (j_count > 0) {
    summary.j_mean = j_sum / j_count;
    summary.j_rejection_5pct = static_cast<double>(j_reject) / j_count;
  }
  return summary;
}

ProbitPopulation probit_population_quantities(const SimDesign& design) {
  if (design.kind != DesignKind::probit_late) {
    throw Error("population quantities are defined for the probit design");
  }
  const int k = static_cast<int>(design.z_probs.size());
  Vector a(k), b(k), pi(k);
  const double phi_b0 = normal_cdf(design.probit_b0);
  for (int l = 0; l < k; ++l) {
    const double t =
        normal_quantile(design.px_given_z[static_cast<std::size_t>(l)]);
    a[l] = bivariate_normal_cdf(design.probit_b0 + design.probit_b1, t,
                                design.rho);
    b[l] = bivariate_normal_cdf(design.probit_b0, t, design.rho) - phi_b0;
    pi[l] = design.z_probs[static_cast<std::size_t>(l)];
  }
  ProbitPopulation out;
  out.lrr.resize(k - 1);
  for (int l = 1; l < k; ++l) {
    out.lrr[l - 1] = (a[l] - a[l - 1]) / (b[l] - b[l - 1]);
  }
  const double abar = a.dot(pi);
  double denom = 0.0;
  for (int l = 0; l < k; ++l) denom += b[l] * (a[l] - abar) * pi[l];
  Vector tails(k);
  double acc = 0.0;
  for (int l = k - 1; l >= 0; --l) {
    acc += (a[l] - abar) * pi[l];
    tails[l] = acc;
  }
  out.tau.resize(k - 1);
  for (int l = 1; l < k; ++l) {
    out.tau[l - 1] = (b[l] - b[l - 1]) * tails[l] / denom;
  }
  out.weighted_average = out.tau.dot(out.lrr);
  return out;
}

namespace {

std::string kind_name(DesignKind k) {
  switch (k) {
    case DesignKind::m1: return "m1";
    case DesignKind::m2: return "m2";
    case DesignKind::probit_late: return "probit-late";
    case DesignKind::saturated: return "saturated";
  }
  return {};
}

}  // namespace

SimDesign design_from_config(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> entries;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      // Blank or comment-only line.
      bool blank = true;
      for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
      if (blank) continue;
      throw InvalidDesignError("config line is not 'key = value': " + line);
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  std::string kind = "m1";
  for (const auto& [key, value] : entries) {
    if (key == "kind") kind = value;
  }
  SimDesign d;
  if (kind == "m1") {
    d = m1_design();
  } else if (kind == "m2") {
    d = m2_design();
  } else if (kind == "probit-late") {
    d = probit_design();
  } else {
    throw InvalidDesignError("unknown design kind '" + kind + "'");
  }
  auto parse_num = [](const std::string& key, const std::string& value) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw InvalidDesignError("config value for '" + key +
                               "' is not numeric: " + value);
    }
  };
  for (const auto& [key, value] : entries) {
    if (key == "kind") continue;
    if (key == "n") {
      d.n = static_cast<Index>(parse_num(key, value));
    } else if (key == "psi0") {
      d.psi0 = parse_num(key, value);
    } else if (key == "p10") {
      d.p10 = parse_num(key, value);
    } else if (key == "alpha0") {
      d.alpha0 = parse_num(key, value);
    } else if (key.rfind("beta", 0) == 0 && key.size() == 5) {
      const int idx = key[4] - '0';
      if (idx < 0 || idx > 5) throw InvalidDesignError("unknown key " + key);
      d.beta[static_cast<std::size_t>(idx)] = parse_num(key, value);
    } else if (key == "z_probs") {
      std::istringstream vs(value);
      std::vector<double> probs;
      double p;
      while (vs >> p) probs.push_back(p);
      if (probs.empty()) throw InvalidDesignError("z_probs is empty");
      d.z_probs = probs;
    } else if (key == "perturbation.phi_on_z1") {
      d.perturb.phi_on_z1 = parse_num(key, value);
    } else if (key == "perturbation.tau_on_z1") {
      d.perturb.tau_on_z1 = parse_num(key, value);
    } else if (key == "perturbation.tau_on_z2") {
      d.perturb.tau_on_z2 = parse_num(key, value);
    } else if (key == "probit.b0") {
      d.probit_b0 = parse_num(key, value);
    } else if (key == "probit.b1") {
      d.probit_b1 = parse_num(key, value);
    } else if (key == "probit.rho") {
      d.rho = parse_num(key, value);
    } else {
      throw InvalidDesignError("unknown config key '" + key + "'");
    }
  }
  return d;
}

std::string design_to_config(const SimDesign& d) {
  std::ostringstream out;
  out.precision(17);
  out << "kind = " << kind_name(d.kind) << "\n";
  out << "n = " << d.n << "\n";
  out << "psi0 = " << d.psi0 << "\n";
  if (d.kind == DesignKind::m1 || d.kind == DesignKind::m2) {
    out << "p10 = " << d.p10 << "\n";
    out << "alpha0 = " << d.alpha0 << "\n";
    for (int j = 0; j < 6; ++j) {
      out << "beta" << j << " = " << d.beta[static_cast<std::size_t>(j)]
          << "\n";
    }
    if (d.perturb.phi_on_z1 != 0.0) {
      out << "perturbation.phi_on_z1 = " << d.perturb.phi_on_z1 << "\n";
    }
    if (d.perturb.tau_on_z1 != 0.0) {
      out << "perturbation.tau_on_z1 = " << d.perturb.tau_on_z1 << "\n";
    }
    if (d.perturb.tau_on_z2 != 0.0) {
      out << "perturbation.tau_on_z2 = " << d.perturb.tau_on_z2 << "\n";
    }
  }
  if (d.kind == DesignKind::probit_late) {
    out << "probit.b0 = " << d.probit_b0 << "\n";
    out << "probit.b1 = " << d.probit_b1 << "\n";
    out << "probit.rho = " << d.rho << "\n";
  }
  out << "z_probs =";
  for (double p : d.z_probs) out << " " << p;
  out << "\n";
  return out.str();
}

}  // namespace ivsmm
