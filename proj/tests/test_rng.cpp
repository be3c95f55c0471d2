#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "ivsmm/rng.hpp"

using namespace ivsmm;

TEST_CASE("equal (seed, stream) pairs are bitwise identical") {
  RngStream a(123456789ULL, 42);
  RngStream b(123456789ULL, 42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u32() == b.next_u32());
  }
  RngStream c(123456789ULL, 42);
  RngStream d(123456789ULL, 42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.uniform() == d.uniform());
  }
}

TEST_CASE("distinct streams differ") {
  RngStream a(99ULL, 0);
  RngStream b(99ULL, 1);
  int same = 0;
  for (int i = 0; i < 256; ++i) {
    if (a.next_u32() == b.next_u32()) ++same;
  }
  CHECK(same < 4);
}

TEST_CASE("uniform range and sample moments") {
  RngStream rng(2024ULL, 7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal draws have the right first two moments") {
  RngStream rng(5150ULL, 3);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sumsq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("bivariate normal correlation") {
  RngStream rng(31337ULL, 0);
  const int n = 200000;
  double suv = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [u, v] = rng.bivariate_normal(0.8);
    suv += u * v;
  }
  CHECK(std::abs(suv / n - 0.8) < 0.02);
}

TEST_CASE("categorical matches requested probabilities") {
  RngStream rng(8ULL, 1);
  std::vector<double> probs{0.5, 0.3, 0.2};
  std::vector<int> counts(3, 0);
  const int n = 300000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.categorical(probs))];
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(k)]) / n -
                   probs[static_cast<std::size_t>(k)]) < 0.005);
  }
}
