#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "runcons/normal_tail.hpp"
#include "runcons/observation.hpp"

namespace runcons {

// Switching fusion: uncorrelated sensors with equal Chernoff information C_i,
// network fully fused (W = J) with probability p per step.
struct SwitchingFusionSpec {
  int n = 0;
  double c_i = 0.0;
  double p = 0.0;

  double c_tot() const { return n * c_i; }

  static SwitchingFusionSpec from_c_tot(int n, double c_tot, double p) {
    return {n, c_tot / n, p};
  }
};

inline void validate_spec(const SwitchingFusionSpec& spec) {
  if (spec.n < 2)
    throw std::invalid_argument("SwitchingFusionSpec: n >= 2 required");
  if (!(spec.c_i > 0.0))
    throw std::invalid_argument("SwitchingFusionSpec: c_i > 0 required");
  if (!(spec.p >= 0.0 && spec.p <= 1.0))
    throw std::invalid_argument("SwitchingFusionSpec: p must be in [0, 1]");
}

inline double abs_log_1mp(double p) { return -std::log1p(-p); }

// chi(l;k) = sqrt(2 C_i) k / sqrt(l/N + (k-l)): the normalized decision
// margin when the last fusion before step k happened at step l. l = k is the
// always-fused limit, giving the centralized margin sqrt(2 N C_i k).
inline double chi(const SwitchingFusionSpec& spec, long l, long k) {
  validate_spec(spec);
  if (k < 1) throw std::domain_error("chi: k >= 1 required");
  if (l < 0 || l > k) throw std::domain_error("chi: l must be in [0, k]");
  const double denom = static_cast<double>(l) / spec.n +
                       static_cast<double>(k - l);
  return std::sqrt(2.0 * spec.c_i) * static_cast<double>(k) /
         std::sqrt(denom);
}

// Exact log error probability of the switching-fusion detector via total
// probability over the time of the last fusion:
//   alpha(k) = sum_{l=1}^{k-1} Q(chi(l;k)) p (1-p)^{k-l-1}
//            + Q(chi(0;k)) (1-p)^{k-1}.
// Everything stays in the log domain; the terms reach e^{-1000} and below
// long before k hits the values the rate experiments need.
inline double log_alpha_switching_fusion(const SwitchingFusionSpec& spec,
                                         long k) {
  validate_spec(spec);
  if (k < 1)
    throw std::domain_error("log_alpha_switching_fusion: k >= 1 required");
  if (k == 1) return log_q_function(chi(spec, 0, 1));
  if (!(spec.p > 0.0 && spec.p < 1.0))
    throw std::domain_error(
        "log_alpha_switching_fusion: p must be in (0, 1) for k >= 2");
  const double log_p = std::log(spec.p);
  const double log_1mp = std::log1p(-spec.p);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(k));
  terms.push_back(log_q_function(chi(spec, 0, k)) + (k - 1) * log_1mp);
  for (long l = 1; l <= k - 1; ++l)
    terms.push_back(log_q_function(chi(spec, l, k)) + log_p +
                    (k - l - 1) * log_1mp);
  double max_term = terms[0];
  for (double t : terms) max_term = std::max(max_term, t);
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  return max_term + std::log(acc);
}

// Decay mode j of the total-probability expansion:
//   phi(j;k) = C_tot / (1 + (N-1)(j+1)/k) + (j/k) |log(1-p)|.
inline double phi_mode(const SwitchingFusionSpec& spec, long j, long k) {
  validate_spec(spec);
  if (k < 1) throw std::domain_error("phi_mode: k >= 1 required");
  if (j < 0 || j > k - 1)
    throw std::domain_error("phi_mode: j must be in [0, k-1]");
  const double first =
      spec.c_tot() /
      (1.0 + (spec.n - 1) * static_cast<double>(j + 1) / static_cast<double>(k));
  if (j == 0) return first;  // avoids 0 * inf at p = 1
  if (spec.p >= 1.0) return std::numeric_limits<double>::infinity();
  return first + static_cast<double>(j) / static_cast<double>(k) *
                     abs_log_1mp(spec.p);
}

// Minimum of phi(.;k) over the continuous interval [0, k-1]; phi is convex in
// j, so the minimum is one of two endpoints or the interior stationary point.
inline double phi_star_k(const SwitchingFusionSpec& spec, long k) {
  validate_spec(spec);
  if (k < 1) throw std::domain_error("phi_star_k: k >= 1 required");
  const double c_tot = spec.c_tot();
  const double nm1 = spec.n - 1;
  const double l = spec.p < 1.0 ? abs_log_1mp(spec.p)
                                : std::numeric_limits<double>::infinity();
  const double edge = 1.0 + nm1 / static_cast<double>(k);
  if (l >= c_tot * nm1 / (edge * edge)) return c_tot / edge;
  if (l <= c_tot * nm1 / (static_cast<double>(spec.n) * spec.n))
    return c_tot / spec.n + (static_cast<double>(k - 1) / k) * l;
  return 2.0 * std::sqrt(l * c_tot / nm1) - l / nm1 - l / static_cast<double>(k);
}

enum class RateRegime { optimal, suboptimal_branch, individual_branch };

inline const char* to_string(RateRegime regime) {
  switch (regime) {
    case RateRegime::optimal: return "optimal";
    case RateRegime::suboptimal_branch: return "suboptimal_branch";
    case RateRegime::individual_branch: return "individual_branch";
  }
  return "unknown";
}

struct RateResult {
  double rate = 0.0;
  RateRegime regime = RateRegime::optimal;
};

// k -> infinity limit of phi_star_k: the achieved decay rate of the
// switching-fusion error probability.
//   C_tot                                  if |log(1-p)| >= C_tot (N-1)
//   C_tot/N + |log(1-p)|                   if |log(1-p)| <= C_tot (N-1)/N^2
//   2 sqrt(|log(1-p)| C_tot/(N-1)) - |log(1-p)|/(N-1)   otherwise.
inline RateResult phi_star(const SwitchingFusionSpec& spec) {
  validate_spec(spec);
  const double c_tot = spec.c_tot();
  const double nm1 = spec.n - 1;
  const double l = spec.p < 1.0 ? abs_log_1mp(spec.p)
                                : std::numeric_limits<double>::infinity();
  if (l >= c_tot * nm1) return {c_tot, RateRegime::optimal};
  if (l <= c_tot * nm1 / (static_cast<double>(spec.n) * spec.n))
    return {c_tot / spec.n + l, RateRegime::individual_branch};
  return {2.0 * std::sqrt(l * c_tot / nm1) - l / nm1,
          RateRegime::suboptimal_branch};
}

// Smallest fusion probability with phi_star = C_tot:
// p* = 1 - exp(-C_tot (N-1)).
inline double fusion_optimality_threshold(const SwitchingFusionSpec& spec) {
  validate_spec(spec);
  return -std::expm1(-spec.c_tot() * (spec.n - 1));
}

// Inputs of the general-network rate bound. K = 8 m_bar / ||S_eta|| is the
// normalized mean-to-covariance ratio; r = lambda_2(E[W^2]).
struct RateBoundInputs {
  int n = 0;
  double sigma_l2 = 0.0;
  double m_l0 = 0.0;  // negative
  double s_eta_norm = 0.0;
  double m_bar = 0.0;
  double r = 0.0;

  double k_ratio() const { return 8.0 * m_bar / s_eta_norm; }
  double c_tot() const { return sigma_l2 / 8.0; }

  // Threshold on |log r| above which the bound reaches C_tot:
  // (1/8) N^2 (1 + (1 - 1/N) K) ||S_eta||.
  double sufficient_threshold() const {
    const double nn = static_cast<double>(n);
    return 0.125 * nn * nn * (1.0 + (1.0 - 1.0 / nn) * k_ratio()) * s_eta_norm;
  }

  static RateBoundInputs from_stats(const DerivedStats& stats, double r) {
    return {stats.n,          stats.sigma_l2, stats.m_l0,
            stats.s_eta_norm, stats.m_bar,    r};
  }
};

inline void validate_inputs(const RateBoundInputs& inp) {
  if (inp.n < 2) throw std::invalid_argument("RateBoundInputs: n >= 2");
  if (!(inp.sigma_l2 > 0.0) || !(inp.s_eta_norm > 0.0) || !(inp.m_bar >= 0.0))
    throw std::invalid_argument("RateBoundInputs: invalid statistics");
  if (!(inp.m_l0 < 0.0))
    throw std::invalid_argument("RateBoundInputs: m_l0 must be negative");
  if (!(inp.r >= 0.0 && inp.r <= 1.0))
    throw std::invalid_argument("RateBoundInputs: r must be in [0, 1]");
}

// Largest usable Chernoff tuning parameter. The two branches split at
// |log r| = ||S_eta||/8 and are discontinuous there for K > 0 (they come
// from different bounding regimes; no smoothing across the seam). Past the
// sufficient threshold the unconstrained optimizer N/2 itself is admissible.
inline double chernoff_mu_cap(const RateBoundInputs& inp) {
  validate_inputs(inp);
  if (!(inp.r > 0.0 && inp.r < 1.0))
    throw std::domain_error("chernoff_mu_cap: r must be in (0, 1)");
  const double lt = -std::log(inp.r);
  const double k = inp.k_ratio();
  if (lt >= inp.sufficient_threshold()) return 0.5 * inp.n;
  if (lt > 0.125 * inp.s_eta_norm) {
    const double disc = k * k + 32.0 * lt / inp.s_eta_norm * (1.0 + k);
    return 0.25 * k / (k + 1.0) + 0.25 * std::sqrt(disc) / (k + 1.0);
  }
  return 0.25 * std::sqrt(k * k + 32.0 * lt / inp.s_eta_norm) - 0.25 * k;
}

struct RateBound {
  double bound = 0.0;
  bool optimal = false;
};

// Lower bound on the decay rate of the error probability at every sensor.
// C_tot when |log r| clears the sufficient threshold, otherwise the Chernoff
// quadratic evaluated at mu_bar.
inline RateBound spectral_rate_bound(const RateBoundInputs& inp) {
  validate_inputs(inp);
  if (inp.r == 0.0) return {inp.c_tot(), true};
  const double lt = -std::log(inp.r);
  if (lt >= inp.sufficient_threshold()) return {inp.c_tot(), true};
  const double mu = inp.r < 1.0 ? chernoff_mu_cap(inp) : 0.0;
  const double nn = static_cast<double>(inp.n);
  const double bound =
      -(0.5 / (nn * nn) * inp.sigma_l2 * mu * mu + inp.m_l0 / nn * mu);
  return {bound + 0.0, false};  // flushes the r = 1 case to +0
}

// The exponent family behind the spectral rate bound:
//   phi(theta; mu) = (1/(2N^2)) sigma_L^2 mu^2 + (1/N) m_L0 mu
//                  + 2 |2mu^2 - mu| m_bar theta + (mu^2/2) ||S_eta|| theta
//                  + theta log r.
inline double chernoff_exponent(const RateBoundInputs& inp, double theta,
                                double mu) {
  validate_inputs(inp);
  if (!(inp.r > 0.0))
    throw std::domain_error("chernoff_exponent: r must be positive");
  if (!(theta >= 0.0 && theta <= 1.0))
    throw std::invalid_argument("chernoff_exponent: theta must be in [0, 1]");
  if (!(mu > 0.0))
    throw std::invalid_argument("chernoff_exponent: mu must be positive");
  const double nn = static_cast<double>(inp.n);
  return 0.5 / (nn * nn) * inp.sigma_l2 * mu * mu + inp.m_l0 / nn * mu +
         2.0 * std::abs(2.0 * mu * mu - mu) * inp.m_bar * theta +
         0.5 * mu * mu * inp.s_eta_norm * theta + theta * std::log(inp.r);
}

// Necessary condition for sensor i to be asymptotically optimal:
// |log(1 - P_i)| > C_tot - C_i. Vacuously true when the sensor alone carries
// the whole network's information (C_i = C_tot).
inline bool connectivity_necessary_condition(double c_tot, double c_i,
                                             double p_i) {
  if (!(c_i > 0.0 && c_i <= c_tot))
    throw std::invalid_argument(
        "connectivity_necessary_condition: need 0 < c_i <= c_tot");
  if (!(p_i >= 0.0 && p_i <= 1.0))
    throw std::invalid_argument(
        "connectivity_necessary_condition: p_i must be in [0, 1]");
  if (c_i >= c_tot) return true;
  if (p_i == 1.0) return true;
  return -std::log1p(-p_i) > c_tot - c_i;
}

// Theoretical rate (or bound) with the flags the comparison harness reports.
struct RateReport {
  double rate_or_bound = 0.0;
  RateRegime regime = RateRegime::optimal;
  bool sufficient_met = false;
  std::optional<bool> necessary_met;
  std::optional<double> empirical_rate;
};

}  // namespace runcons
