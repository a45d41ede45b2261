#include "peal/cdw.hpp"

#include <algorithm>
#include <cmath>

namespace peal {

StabilityReport stability_check(double g, double k_spring, std::optional<int> L) {
  if (!(k_spring > 0)) throw ParameterError("k_spring must be > 0");
  if (!(g >= 0)) throw ParameterError("g must be >= 0");
  StabilityReport r{};
  const double inf = std::numeric_limits<double>::infinity();
  if (!L) {
    r.size_class = SizeClass::Infinite;
    r.slope0 = inf;
    r.g_crit = 0;
    r.stable_cdw = g > 0;
  } else {
    detail::require_even(*L);
    if (*L % 4 == 0) {
      r.size_class = SizeClass::FourN;
      r.slope0 = inf;
      r.g_crit = 0;
      r.stable_cdw = g > 0;
    } else {
      r.size_class = SizeClass::FourNPlusTwo;
      r.slope0 = slope_at_zero<double>(*L);
      r.g_crit = g_crit<double>(k_spring, *L);
      r.stable_cdw = g > r.g_crit;
    }
  }

  auto curve = [&](double x) { return L ? cdw_finite(x, *L) : cdw_infinite(x); };
  r.min_secant_margin = inf;
  constexpr int kPoints = 200;
  for (int i = 0; i < kPoints; ++i) {
    const double x = 1e-3 * std::pow(1e4, static_cast<double>(i) / (kPoints - 1));
    const double h = 1e-5 * x;
    const double deriv = (curve(x + h) - curve(x - h)) / (2 * h);
    const double secant = curve(x) / x;
    r.min_secant_margin = std::min(r.min_secant_margin, secant - deriv);
  }
  // Finite-difference noise floor on the derivative.
  r.concavity_ok = r.min_secant_margin > -1e-6;
  return r;
}

}  // namespace peal
