#include <cmath>

#include <doctest.h>

#include "ivsmm/errors.hpp"
#include "ivsmm/numerics.hpp"
#include "ivsmm/rng.hpp"
#include "oracles.hpp"

using namespace ivsmm;

TEST_CASE("normal_cdf basic values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(normal_cdf(40.0) - 1.0) <= 1e-15);
  CHECK(std::abs(normal_cdf(-40.0)) <= 1e-15);
  // Frozen from the integration oracle below.
  CHECK(std::abs(normal_cdf(1.959964) - 0.9750000009) <= 1e-6);
  CHECK(std::abs(normal_cdf(1.959964) -
                 oracles::normal_cdf_by_integration(1.959964)) <= 1e-9);
  for (double x : {-3.0, -0.7, 0.3, 1.1, 2.5}) {
    CHECK(std::abs(normal_cdf(x) - oracles::normal_cdf_by_integration(x)) <=
          1e-10);
    CHECK(normal_cdf(x) + normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("normal_quantile values and round trip") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  // Frozen from the bisection oracle.
  CHECK(std::abs(normal_quantile(0.4) - (-0.2533471031)) <= 1e-4);
  CHECK(std::abs(normal_quantile(0.1) - (-1.2815515655)) <= 1e-4);
  CHECK(std::abs(normal_quantile(0.4) -
                 oracles::normal_quantile_by_bisection(0.4)) <= 1e-9);
  CHECK_THROWS_AS((void)normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS((void)normal_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS((void)normal_quantile(-0.2), std::domain_error);

  RngStream rng(7, 0);
  for (int i = 0; i < 2000; ++i) {
    const double p = rng.uniform_open();
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10);
  }
  // Tails.
  for (double p : {1e-10, 1e-6, 1e-3, 0.999, 1.0 - 1e-8}) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10);
  }
}

TEST_CASE("chisq_survival values, monotonicity, oracle") {
  CHECK(chisq_survival(0.0, 1) == doctest::Approx(1.0));
  CHECK(std::abs(chisq_survival(3.8415, 1) - 0.05) <= 1e-4);
  CHECK(std::abs(chisq_survival(5.9915, 2) - 0.05) <= 1e-4);
  // df = 2 closed form.
  CHECK(chisq_survival(5.9915, 2) ==
        doctest::Approx(std::exp(-5.9915 / 2)).epsilon(1e-12));
  CHECK(std::abs(chisq_survival(3.8415, 1) -
                 oracles::chisq_survival_by_integration(3.8415, 1)) <= 1e-8);
  CHECK(std::abs(chisq_survival(7.5, 3) -
                 oracles::chisq_survival_by_integration(7.5, 3)) <= 1e-8);

  for (int df : {1, 2, 5, 10}) {
    double prev = 1.0;
    for (double x = 0.25; x < 30.0; x += 0.25) {
      const double s = chisq_survival(x, df);
      CHECK(s <= prev + 1e-14);
      prev = s;
    }
  }
}

TEST_CASE("solve_linear identity, diagonal, SPD property, singular") {
  Matrix eye = Matrix::Identity(3, 3);
  Vector b(3);
  b << 1, 2, 3;
  CHECK((solve_linear(eye, b) - b).norm() <= 1e-14);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  Vector b2(2);
  b2 << 2, 4;
  Vector x2 = solve_linear(d, b2);
  CHECK(x2[0] == doctest::Approx(1.0));
  CHECK(x2[1] == doctest::Approx(1.0));

  RngStream rng(11, 0);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix m(5, 5);
    for (Index i = 0; i < 5; ++i) {
      for (Index j = 0; j < 5; ++j) m(i, j) = rng.normal();
    }
    Matrix spd = m * m.transpose() + 0.5 * Matrix::Identity(5, 5);
    Vector rhs(5);
    for (Index i = 0; i < 5; ++i) rhs[i] = rng.normal();
    const Vector x = solve_linear(spd, rhs);
    CHECK((spd * x - rhs).norm() <= 1e-8 * rhs.norm());
  }

  Matrix sing = Matrix::Ones(3, 3);
  bool threw = false;
  try {
    (void)solve_linear(sing, b);
  } catch (const SingularMatrixError& e) {
    threw = true;
    CHECK(e.condition >= 1e12);
  }
  CHECK(threw);
}

TEST_CASE("finite_diff_jacobian") {
  auto ident = [](const Vector& t) { return t; };
  Vector at(3);
  at << 0.3, -1.0, 2.0;
  Matrix j = finite_diff_jacobian(ident, at);
  CHECK((j - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-9);

  auto poly = [](const Vector& t) {
    Vector f(2);
    f << t[0] * t[0], t[0] * t[1];
    return f;
  };
  Vector at2(2);
  at2 << 2.0, 3.0;
  Matrix j2 = finite_diff_jacobian(poly, at2);
  CHECK(std::abs(j2(0, 0) - 4.0) <= 1e-5);
  CHECK(std::abs(j2(0, 1) - 0.0) <= 1e-5);
  CHECK(std::abs(j2(1, 0) - 3.0) <= 1e-5);
  CHECK(std::abs(j2(1, 1) - 2.0) <= 1e-5);

  auto bad = [](const Vector& t) {
    Vector f(1);
    f << std::log(t[0]);
    return f;
  };
  Vector at3(1);
  at3 << 1e-9;
  CHECK_THROWS_AS((void)finite_diff_jacobian(bad, at3), NonFiniteError);
}

TEST_CASE("bivariate normal cdf against closed forms") {
  CHECK(bivariate_normal_cdf(0, 0, 0.0) == doctest::Approx(0.25).epsilon(1e-10));
  // P(U<=0, V<=0) = 1/4 + asin(rho) / (2 pi).
  for (double rho : {-0.9, -0.3, 0.2, 0.8}) {
    const double expected = 0.25 + std::asin(rho) / (2.0 * M_PI);
    CHECK(std::abs(bivariate_normal_cdf(0, 0, rho) - expected) <= 1e-10);
  }
  // Marginal limits.
  CHECK(std::abs(bivariate_normal_cdf(0.7, 9.5, 0.5) - normal_cdf(0.7)) <=
        1e-9);
  // Symmetry in the arguments.
  CHECK(bivariate_normal_cdf(0.3, -0.8, 0.6) ==
        doctest::Approx(bivariate_normal_cdf(-0.8, 0.3, 0.6)).epsilon(1e-12));
  // Degenerate correlations.
  CHECK(bivariate_normal_cdf(0.5, -0.2, 1.0) ==
        doctest::Approx(normal_cdf(-0.2)));
  CHECK(bivariate_normal_cdf(0.5, -0.2, -1.0) ==
        doctest::Approx(std::max(0.0, normal_cdf(0.5) + normal_cdf(-0.2) - 1)));
}

TEST_CASE("symmetry helpers") {
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0 + 1e-13, 4.0;
  CHECK(is_symmetric(m));
  m(1, 0) = 2.1;
  CHECK(!is_symmetric(m));
  CHECK(is_symmetric(symmetrize(m)));
}
