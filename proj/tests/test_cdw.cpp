#include "peal/cdw.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace peal;

namespace {

// Midpoint-rule quadrature of int_0^{pi/2} (1 - m sin^2)^{-1/2}.
double elliptic_k_quadrature(double m) {
  const int n = 200000;
  const double h = std::numbers::pi / 2 / n;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * h;
    s += 1 / std::sqrt(1 - m * std::sin(x) * std::sin(x));
  }
  return s * h;
}

}  // namespace

TEST_CASE("elliptic K") {
  CHECK(elliptic_k(0.0) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  for (double m : {-16.0, -4.0, -0.5, 0.3, 0.9})
    CHECK(elliptic_k(m) == doctest::Approx(elliptic_k_quadrature(m)).epsilon(1e-9));
  CHECK_THROWS_AS(elliptic_k(1.0), DomainError);
}

TEST_CASE("infinite-chain response") {
  CHECK(cdw_infinite(0.0) == 0);
  CHECK(std::abs(cdw_infinite(1e4) - 0.5) < 1e-6);
  for (double x : {0.1, 0.7, 3.0}) CHECK(cdw_infinite(-x) == -cdw_infinite(x));
}

TEST_CASE("finite-chain response") {
  CHECK(cdw_finite(0.0, 8) == doctest::Approx(1.0 / 8));
  CHECK(cdw_finite(1e-12, 8) == doctest::Approx(1.0 / 8).epsilon(1e-9));
  CHECK(cdw_finite(-0.0, 8) == doctest::Approx(-1.0 / 8));
  CHECK(cdw_finite(0.0, 50) == 0);
  const double slope = cdw_finite(1e-7, 50) / 1e-7;
  CHECK(slope == doctest::Approx(slope_at_zero(50)).epsilon(1e-6));
  CHECK(std::abs(cdw_finite(1.0, 1002) - cdw_infinite(1.0)) < 1e-3);
  CHECK_THROWS_AS(cdw_finite(1.0, 7), ParameterError);
}

TEST_CASE("slope and critical coupling") {
  const int sizes[] = {2, 6, 10, 22, 50, 102};
  const double slope[] = {0.25, 0.4167, 0.4972, 0.6224, 0.7529, 0.8664};
  const double gc[] = {2.0, 1.5492, 1.4182, 1.2676, 1.1524, 1.0743};
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(slope_at_zero(sizes[i]) - slope[i]) < 5e-5);
    CHECK(std::abs(g_crit(1.0, sizes[i]) - gc[i]) < 5e-5);
  }
  CHECK(g_crit(4.0, 2) == doctest::Approx(4.0));
  CHECK_THROWS_AS(slope_at_zero(8), DomainError);
  CHECK_THROWS_AS(g_crit(1.0, 8), DomainError);
  CHECK_THROWS_AS(g_crit(0.0, 6), ParameterError);
}

TEST_CASE("stability") {
  const auto yes = stability_check(1.4, 1.0, 50);
  CHECK(yes.size_class == SizeClass::FourNPlusTwo);
  CHECK(yes.stable_cdw);
  CHECK(yes.concavity_ok);
  CHECK(yes.min_secant_margin > -1e-6);
  CHECK_FALSE(stability_check(1.0, 1.0, 50).stable_cdw);

  const auto fourn = stability_check(0.1, 1.0, 48);
  CHECK(fourn.size_class == SizeClass::FourN);
  CHECK(fourn.stable_cdw);
  CHECK(std::isinf(fourn.slope0));

  const auto inf = stability_check(0.1, 1.0, std::nullopt);
  CHECK(inf.size_class == SizeClass::Infinite);
  CHECK(inf.stable_cdw);
  CHECK(inf.concavity_ok);
}
