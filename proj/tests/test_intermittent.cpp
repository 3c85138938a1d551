#include <cmath>

#include "doctest.h"
#include "towerlab/errors.hpp"
#include "towerlab/intermittent.hpp"
#include "towerlab/rng.hpp"

using namespace towerlab;

namespace {

// independent bisection oracle for phi^{-1}, used to freeze expected values
double bisect_phi_inverse(double target, double theta, double tol = 1e-15) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = mid * (1.0 + std::pow(mid, theta));
    if (f < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < tol) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("phi: direct substitutions") {
  auto p1 = IntermittentParams::with_theta(1.0);
  CHECK(phi(0.5, p1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(phi(0.0, p1) == 0.0);
  auto p05 = IntermittentParams::with_theta(0.5);
  CHECK(phi(0.25, p05) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(phi(0.0, p05) == 0.0);
  // odd reflection on the negative branch
  CHECK(phi(-0.25, p05) == doctest::Approx(-0.375).epsilon(1e-15));
}

TEST_CASE("phi: domain error beyond the fiber") {
  auto p = IntermittentParams::with_theta(0.5);
  CHECK_THROWS_AS(phi(0.9, p), DomainError);
}

TEST_CASE("phi_inverse: forward example inverted and the bisection oracle") {
  auto p1 = IntermittentParams::with_theta(1.0);
  CHECK(phi_inverse(0.75, p1) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(phi_inverse(0.0, p1) == 0.0);
  // x + x^2 = 0.5 has root (-1+sqrt(3))/2; frozen from the oracle
  const double oracle = bisect_phi_inverse(0.5, 1.0);
  CHECK(oracle == doctest::Approx((std::sqrt(3.0) - 1.0) / 2.0).epsilon(1e-12));
  CHECK(phi_inverse(0.5, p1) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(phi_inverse(0.5, p1) == doctest::Approx(0.3660254).epsilon(1e-6));
  auto p05 = IntermittentParams::with_theta(0.5);
  CHECK(phi_inverse(0.375, p05) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK_THROWS_AS(phi_inverse(2.0, p05), DomainError);
}

TEST_CASE("boundary_sequence: recursion against the oracle") {
  auto p1 = IntermittentParams::with_theta(1.0);
  auto seq0 = boundary_sequence(p1, BoundarySequence::Side::right, 0);
  REQUIRE(seq0.values.size() == 1);
  CHECK(seq0.values[0] == 0.5);

  auto seq = boundary_sequence(p1, BoundarySequence::Side::right, 1);
  CHECK(seq.values[1] == doctest::Approx(bisect_phi_inverse(0.5, 1.0)).epsilon(1e-12));

  auto left = boundary_sequence(p1, BoundarySequence::Side::left, 3);
  for (std::size_t n = 0; n + 1 < left.values.size(); ++n) {
    CHECK(left.values[n] < left.values[n + 1]);
    CHECK(left.values[n + 1] < 0.0);
    // phi(a_{n+1}) = a_n within tolerance
    CHECK(phi(left.values[n + 1], p1) == doctest::Approx(left.values[n]).epsilon(1e-12));
  }
}

TEST_CASE("boundary_sequence: asymptotics a_n ~ (theta n)^(-1/theta)") {
  for (double theta : {0.5, 1.0}) {
    auto p = IntermittentParams::with_theta(theta);
    auto seq = boundary_sequence(p, BoundarySequence::Side::right, 1'000'000);
    const double a = seq.values[1'000'000];
    const double scaled = a * std::pow(theta * 1e6, 1.0 / theta);
    CHECK(std::abs(scaled - 1.0) < 0.02);
    // Cauchy check: relative change of n^{1/theta} a_n over [1e5, 1e6] below 1%
    const double s1 = seq.values[100'000] * std::pow(theta * 1e5, 1.0 / theta);
    CHECK(std::abs(s1 / scaled - 1.0) < 0.01);
  }
}

TEST_CASE("boundary_sequence: gap bound Delta a_n * n^{1+1/theta} bounded") {
  auto p = IntermittentParams::with_theta(0.5);
  auto seq = boundary_sequence(p, BoundarySequence::Side::right, 100'000);
  double worst = 0.0;
  for (int n = 1; n < 100'000; ++n) {
    const double gap = seq.values[n] - seq.values[n + 1];
    CHECK(gap > 0.0);
    worst = std::max(worst, gap * std::pow(static_cast<double>(n), 1.0 + 1.0 / p.theta));
  }
  CHECK(worst < 100.0);  // uniform bound; the constant is O(10) in practice
}

TEST_CASE("derivative_product: closed-form small cases") {
  auto p1 = IntermittentParams::with_theta(1.0);
  CHECK(derivative_product(0.37, 0, p1) == 1.0);
  // phi'(a) = 1 + (1+theta) a^theta; at theta=1, a=0.5: 2
  CHECK(derivative_product(0.5, 1, p1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("derivative_product: lower bound c n^{tau+1} stable over n") {
  auto p = IntermittentParams::with_theta(1.0);
  auto seq = boundary_sequence(p, BoundarySequence::Side::right, 600);
  double c_min = 1e300, c_max = 0.0;
  for (int n = 50; n <= 500; n += 30) {
    const double x = 0.5 * (seq.values[n + 1] + seq.values[n]);
    const double v = derivative_product(x, n, p) / std::pow(n, p.tau + 1.0);
    c_min = std::min(c_min, v);
    c_max = std::max(c_max, v);
  }
  CHECK(c_min > 0.0);
  CHECK(c_max / c_min < 20.0);  // the normalized product stays in a narrow band
}

TEST_CASE("derivative_product: escape raises DomainError") {
  auto p = IntermittentParams::with_theta(0.5);
  CHECK_THROWS_AS(derivative_product(0.45, 50, p), DomainError);
}

TEST_CASE("distortion_ratio: trivial and bounded cases") {
  auto p = IntermittentParams::with_theta(0.5);
  auto seq = boundary_sequence(p, BoundarySequence::Side::right, 300);
  const double a = seq.values[51];
  const double b = seq.values[50];
  CHECK(distortion_ratio(a, a, 10, 50, p, seq) == 0.0);
  CHECK(distortion_ratio(a, b, 0, 50, p, seq) == 0.0);
  // full-depth distortion over the level interval stays uniformly bounded
  double sup = 0.0;
  for (int n = 10; n <= 200; n += 19) {
    const double lo = seq.values[n + 1];
    const double hi = seq.values[n];
    sup = std::max(sup, distortion_ratio(lo, hi, n, n, p, seq));
  }
  CHECK(sup < 5.0);
  CHECK_THROWS_AS(distortion_ratio(0.4, 0.41, 5, 50, p, seq), DomainError);
}

TEST_CASE("monotonicity and inverse round trip on 1e4 points") {
  auto p = IntermittentParams::with_theta(0.5);
  Rng rng(11, 0);
  double prev = -1.0;
  for (int i = 0; i < 10'000; ++i) {
    const double a = 0.5 * rng.uniform();
    const double image = phi(a, p);
    const double back = phi_inverse(image, p);
    CHECK(std::abs(back - a) <= 10.0 * p.newton_tol);
    if (i % 100 == 0) {
      // spot-check strict monotonicity on an increasing grid
      const double x = 0.5 * i / 10'000.0;
      const double y = phi(x, p);
      CHECK(y > prev);
      prev = y;
    }
  }
}
