#pragma once

#include "peal/core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace peal {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Complete elliptic integral of the first kind K(m), parameter convention
// K(m) = int_0^{pi/2} (1 - m sin^2)^{-1/2}, valid for m < 1. Evaluated as
// pi / (2 AGM(1, sqrt(1 - m))); for m < 0 the second argument exceeds 1,
// which the AGM handles directly.
template <typename Scalar>
Scalar elliptic_k(Scalar m) {
  if (!(m < Scalar(1))) throw DomainError("elliptic_k requires m < 1");
  Scalar a(1);
  Scalar b = std::sqrt(Scalar(1) - m);
  for (int it = 0; it < 64; ++it) {
    const Scalar an = (a + b) / Scalar(2);
    const Scalar bn = std::sqrt(a * b);
    a = an;
    b = bn;
    if (std::abs(a - b) <= Scalar(1e-15) * a) break;
  }
  return std::numbers::pi_v<Scalar> / (Scalar(2) * a);
}

// L -> infinity CDW amplitude: sign(gQ) K(-(2/gQ)^2) / pi.
template <typename Scalar>
Scalar cdw_infinite(Scalar gQ) {
  if (gQ == Scalar(0)) return Scalar(0);
  const Scalar r = Scalar(2) / gQ;
  const Scalar n = elliptic_k(-r * r) / std::numbers::pi_v<Scalar>;
  return gQ > 0 ? n : -n;
}

namespace detail {
// |cos k| on the half Brillouin zone k = 2 pi j / L, j = 0 .. L/2 - 1, with
// the k = pi/2 point (L = 4N) set to exactly zero.
template <typename Scalar>
std::vector<Scalar> half_zone_abs_cos(int L) {
  std::vector<Scalar> c;
  c.reserve(L / 2);
  for (int j = 0; j < L / 2; ++j) {
    if (4 * j == L) {
      c.push_back(Scalar(0));
    } else {
      c.push_back(std::abs(std::cos(Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(j) / Scalar(L))));
    }
  }
  return c;
}

inline void require_even(int L) {
  if (L < 2 || L % 2 != 0) throw ParameterError("L must be even and >= 2");
}
}  // namespace detail

// Finite-L CDW amplitude sum_k sign(gQ) / (L sqrt((2 cos k / gQ)^2 + 1)).
// At gQ == 0 the one-sided limit selected by the sign bit of gQ is returned
// (+1/L from +0.0 and -1/L from -0.0 when L = 4N; 0 otherwise).
template <typename Scalar>
Scalar cdw_finite(Scalar gQ, int L) {
  detail::require_even(L);
  const Scalar sgn = std::signbit(gQ) ? Scalar(-1) : Scalar(1);
  const Scalar x = std::abs(gQ);
  Scalar sum(0);
  for (Scalar c : detail::half_zone_abs_cos<Scalar>(L)) {
    if (c == Scalar(0)) {
      sum += Scalar(1);
    } else if (x > 0) {
      sum += x / std::sqrt(Scalar(4) * c * c + x * x);
    }
  }
  return sgn * sum / Scalar(L);
}

// d n / d(gQ) at 0+, defined only for L = 4N + 2.
template <typename Scalar = double>
Scalar slope_at_zero(int L) {
  detail::require_even(L);
  if (L % 4 == 0)
    throw DomainError("slope at zero is undefined for L = 4N (CDW jumps by 1/L at gQ = 0), L=" +
                      std::to_string(L));
  Scalar s(0);
  for (Scalar c : detail::half_zone_abs_cos<Scalar>(L)) s += Scalar(1) / (Scalar(2) * Scalar(L) * c);
  return s;
}

template <typename Scalar = double>
Scalar g_crit(Scalar k_spring, int L) {
  if (!(k_spring > 0)) throw ParameterError("k_spring must be > 0");
  detail::require_even(L);
  if (L % 4 == 0)
    throw DomainError("g_crit is undefined for L = 4N (CDW exists for every g), L=" + std::to_string(L));
  Scalar inv(0);
  for (Scalar c : detail::half_zone_abs_cos<Scalar>(L)) inv += Scalar(1) / c;
  return std::sqrt(Scalar(2) * k_spring * Scalar(L) / inv);
}

enum class SizeClass { FourN, FourNPlusTwo, Infinite };

struct StabilityReport {
  SizeClass size_class;
  double slope0;        // +inf when the curve is discontinuous or log-divergent at 0
  double g_crit;        // 0 when any g > 0 gives a CDW
  bool stable_cdw;
  // Concavity scan: secant n/(gQ) >= dn/d(gQ) on a gQ > 0 grid, which makes
  // k - g dn/dQ > 0 at every self-consistent CDW point.
  bool concavity_ok;
  double min_secant_margin;  // min over the grid of secant - derivative
};

// `L` empty selects the infinite chain.
StabilityReport stability_check(double g, double k_spring, std::optional<int> L);

}  // namespace peal
