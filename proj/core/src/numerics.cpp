#include "ivsmm/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ivsmm/errors.hpp"

namespace ivsmm {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSingularCondition = 1e12;
}  // namespace

bool is_symmetric(const Matrix& m, double rtol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rtol * scale;
}

Matrix symmetrize(Matrix m) {
  m = 0.5 * (m + m.transpose()).eval();
  return m;
}

bool is_binary01(const Vector& v) {
  return ((v.array() == 0.0) || (v.array() == 1.0)).all();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  }
  // Acklam's rational approximation, |relative error| < 1.2e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Two Newton polish steps on the CDF.
  for (int it = 0; it < 2; ++it) {
    const double dens = normal_pdf(x);
    if (dens < 1e-300) break;
    x -= (normal_cdf(x) - p) / dens;
  }
  return x;
}

namespace {

// Regularized lower incomplete gamma P(a, x) by series expansion (x < a + 1).
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int k = 0; k < 500; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double chisq_survival(double x, int df) {
  if (df < 1) throw std::domain_error("chisq_survival: df must be >= 1");
  if (!(x >= 0.0)) throw std::domain_error("chisq_survival: x must be >= 0");
  if (x == 0.0) return 1.0;
  const double a = 0.5 * df;
  const double t = 0.5 * x;
  if (t < a + 1.0) return 1.0 - gamma_p_series(a, t);
  return gamma_q_cf(a, t);
}

GaussLegendre gauss_legendre(int n) {
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    gl.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    gl.weights[n - 1 - i] = gl.weights[i];
  }
  return gl;
}

double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(std::isfinite(rho)) || std::abs(rho) > 1.0) {
    throw std::domain_error("bivariate_normal_cdf: |rho| must be <= 1");
  }
  if (rho >= 1.0 - 1e-12) return normal_cdf(std::min(h, k));
  if (rho <= -1.0 + 1e-12) {
    return std::max(0.0, normal_cdf(h) + normal_cdf(k) - 1.0);
  }
  const double cap = 9.0;
  const double hi = std::min(h, cap);
  if (hi <= -cap) return 0.0;
  const double lo = -cap;
  const double s = std::sqrt(1.0 - rho * rho);
  static const GaussLegendre gl = gauss_legendre(128);
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (Index i = 0; i < gl.nodes.size(); ++i) {
    const double u = mid + half * gl.nodes[i];
    sum += gl.weights[i] * normal_pdf(u) * normal_cdf((k - rho * u) / s);
  }
  return half * sum;
}

LinearSolver::LinearSolver(const Matrix& a) : lu_(a) {
  const Vector diag = lu_.matrixLU().diagonal().cwiseAbs();
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (Index i = 0; i < diag.size(); ++i) {
    if (diag[i] < dmin) {
      dmin = diag[i];
      weakest_row_ = static_cast<int>(i);
    }
    dmax = std::max(dmax, diag[i]);
  }
  condition_ = (dmin == 0.0) ? std::numeric_limits<double>::infinity()
                             : dmax / dmin;
  if (!(condition_ < kSingularCondition)) {
    throw SingularMatrixError(
        "matrix is singular or nearly singular (pivot condition estimate " +
            std::to_string(condition_) + ")",
        condition_);
  }
}

Vector LinearSolver::solve(const Vector& b) const { return lu_.solve(b); }

Matrix LinearSolver::solve_matrix(const Matrix& b) const {
  return lu_.solve(b);
}

Vector solve_linear(const Matrix& a, const Vector& b) {
  return LinearSolver(a).solve(b);
}

Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f,
                            const Vector& theta, double h_scale) {
  const Index p = theta.size();
  Vector probe = theta;
  Matrix jac;
  for (Index j = 0; j < p; ++j) {
    const double h = h_scale * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + h;
    const Vector fp = f(probe);
    probe[j] = theta[j] - h;
    const Vector fm = f(probe);
    probe[j] = theta[j];
    if (!fp.allFinite() || !fm.allFinite()) {
      throw NonFiniteError("finite_diff_jacobian: non-finite function value");
    }
    if (jac.size() == 0) jac.resize(fp.size(), p);
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace ivsmm
