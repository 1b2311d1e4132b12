#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace runcons {

// Right tail probability of the standard normal, Q(t) = P(Z > t).
inline double q_function(double t) {
  if (!std::isfinite(t))
    throw std::domain_error("q_function: argument must be finite");
  return 0.5 * std::erfc(t / std::numbers::sqrt2);
}

// log Q(t), usable across the whole tail. Q(t) itself underflows past
// t ~ 38; the far-tail branch switches to the scaled asymptotic expansion
//   Q(t) = phi(t)/t * (1 - 1/t^2 + 3/t^4 - 15/t^6 + ...)
// so the log never passes through an underflowed probability.
inline double log_q_function(double t) {
  if (!std::isfinite(t))
    throw std::domain_error("log_q_function: argument must be finite");
  if (t < 0.0) {
    // Q(t) = 1 - Q(-t); expanding around 1 keeps relative accuracy.
    return std::log1p(-q_function(-t));
  }
  if (t <= 25.0) return std::log(0.5 * std::erfc(t / std::numbers::sqrt2));
  const double inv_t2 = 1.0 / (t * t);
  double series = 0.0;
  double term = 1.0;
  for (int n = 1; n <= 8; ++n) {
    term *= -static_cast<double>(2 * n - 1) * inv_t2;
    series += term;
  }
  return -0.5 * t * t - std::log(t) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(series);
}

struct QBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Gaussian tail bracket, valid for t > 0:
//   t/(1+t^2) * phi(t) <= Q(t) <= phi(t)/t,  phi = standard normal density.
// The two sides differ by the factor 1 + 1/t^2.
inline QBounds q_bounds(double t) {
  if (!std::isfinite(t) || !(t > 0.0))
    throw std::domain_error("q_bounds: argument must be finite and positive");
  const double density =
      std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
  return {t / (1.0 + t * t) * density, density / t};
}

}  // namespace runcons
