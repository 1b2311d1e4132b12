// Independent oracles used only by tests. None of these touch the library's
// own code paths: the tail probability comes from long-double quadrature
// (not erfc), and the mode minimizer is plain golden-section search.
#pragma once

#include <cmath>
#include <functional>

namespace oracles {

// integral of exp(-t s - s^2/2) ds over [0, S], composite Simpson with
// doubling until the relative change is below 5e-15.
inline long double tail_integral(long double t) {
  // cutoff where the integrand has dropped to ~1e-26 of its peak
  const long double s_max = -t + std::sqrt(t * t + 120.0L);
  const auto f = [&](long double s) { return std::exp(-t * s - 0.5L * s * s); };
  long double prev = 0.0L;
  for (long n = 64; n <= (1L << 19); n *= 2) {
    const long double h = s_max / n;
    long double odd = 0.0L, even = 0.0L;
    for (long i = 1; i < n; i += 2) odd += f(i * h);
    for (long i = 2; i < n; i += 2) even += f(i * h);
    const long double integral =
        h / 3.0L * (f(0.0L) + 4.0L * odd + 2.0L * even + f(s_max));
    if (n > 64 && std::abs(integral - prev) <= 5e-15L * std::abs(integral))
      return integral;
    prev = integral;
  }
  return prev;
}

// Q(t) = P(Z > t) by quadrature of the substituted tail integral:
// Q(t) = phi(t) * integral_0^inf exp(-t s - s^2/2) ds.
inline long double q_oracle(long double t) {
  if (t < 0.0L) return 1.0L - q_oracle(-t);
  const long double log_phi =
      -0.5L * t * t - 0.5L * std::log(2.0L * 3.14159265358979323846264338328L);
  return std::exp(log_phi) * tail_integral(t);
}

inline long double log_q_oracle(long double t) {
  if (t < 0.0L) return std::log1p(-q_oracle(-t));
  const long double log_phi =
      -0.5L * t * t - 0.5L * std::log(2.0L * 3.14159265358979323846264338328L);
  return log_phi + std::log(tail_integral(t));
}

// Golden-section minimum of a unimodal function on [lo, hi].
inline double golden_section_min(const std::function<double(double)>& f,
                                 double lo, double hi, double tol = 1e-12) {
  const double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return f(x);
}

}  // namespace oracles
