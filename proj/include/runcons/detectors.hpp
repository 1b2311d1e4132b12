#pragma once

#include <span>
#include <vector>

#include "runcons/errors.hpp"
#include "runcons/linalg.hpp"
#include "runcons/normal_tail.hpp"
#include "runcons/observation.hpp"

namespace runcons {

// Draws the per-sensor LLR contribution eta(k) ~ N(m_eta^(l), S_eta).
// S_eta may be singular, so the factor comes from an eigendecomposition with
// the nonnegative part of the spectrum.
class EtaSampler {
 public:
  explicit EtaSampler(const DerivedStats& stats)
      : mean0_(stats.m_eta0), mean1_(stats.m_eta1) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(stats.s_eta);
    if (eig.info() != Eigen::Success)
      throw numeric_error("EtaSampler: eigendecomposition of S_eta failed");
    const Vector& values = eig.eigenvalues();
    const double floor = -1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff());
    if (values.minCoeff() < floor)
      throw numeric_error("EtaSampler: S_eta is not positive semidefinite");
    factor_ = eig.eigenvectors() *
              values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  int size() const { return static_cast<int>(mean0_.size()); }

  // Deterministic map from a standard normal draw z to eta.
  void from_z(int hypothesis, const Vector& z, Vector& out) const {
    out = hypothesis == 0 ? mean0_ : mean1_;
    out.noalias() += factor_ * z;
  }

  void sample(int hypothesis, SplitStream& rng, Vector& z_scratch,
              Vector& out) const {
    for (Eigen::Index i = 0; i < z_scratch.size(); ++i)
      z_scratch[i] = rng.next_normal();
    from_z(hypothesis, z_scratch, out);
  }

  Vector sample(int hypothesis, SplitStream& rng) const {
    Vector z(size()), out(size());
    sample(hypothesis, rng, z, out);
    return out;
  }

 private:
  Vector mean0_;
  Vector mean1_;
  Matrix factor_;
};

// Decision variables of all sensors at time k. The recursion is
//   x(k+1) = (k/(k+1)) W(k) x(k) + (1/(k+1)) eta(k+1),  x(1) = eta(1).
struct ConsensusState {
  long k = 1;
  Vector x;
};

inline ConsensusState consensus_init(Vector eta1) {
  return {1, std::move(eta1)};
}

inline ConsensusState consensus_step(const ConsensusState& state,
                                     const Matrix& w,
                                     const Vector& eta_next) {
  if (state.k < 1)
    throw std::invalid_argument("consensus_step: state.k must be >= 1");
  if (w.rows() != w.cols() || w.rows() != state.x.size() ||
      eta_next.size() != state.x.size())
    throw std::invalid_argument("consensus_step: dimension mismatch");
  const double a = static_cast<double>(state.k) / (state.k + 1);
  const double b = 1.0 / (state.k + 1);
  ConsensusState next{state.k + 1, Vector(state.x.size())};
  next.x.noalias() = a * (w * state.x);
  next.x += b * eta_next;
  return next;
}

// x(k) = (1/k) ( sum_{j<k} W(k-1)...W(j) eta(j) + eta(k) ), evaluated by the
// forward recurrence A(j+1) = W(j) A(j) + eta(j+1).
inline Vector closed_form_state(std::span<const Matrix> weights,
                                std::span<const Vector> etas) {
  if (etas.size() < 2)
    throw std::invalid_argument("closed_form_state: need k >= 2");
  if (weights.size() + 1 != etas.size())
    throw std::invalid_argument(
        "closed_form_state: need k-1 weights for k etas");
  Vector acc = etas[0];
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j].rows() != acc.size() || etas[j + 1].size() != acc.size())
      throw std::invalid_argument("closed_form_state: dimension mismatch");
    acc = weights[j] * acc + etas[j + 1];
  }
  return acc / static_cast<double>(etas.size());
}

// Local zero-threshold test: decide H1 iff x_i(k) > 0 (ties go to H0).
struct DecisionRecord {
  long k = 0;
  std::vector<int> decisions;
};

inline DecisionRecord decide(const ConsensusState& state) {
  DecisionRecord rec{state.k, std::vector<int>(state.x.size())};
  for (Eigen::Index i = 0; i < state.x.size(); ++i)
    rec.decisions[i] = state.x[i] > 0.0 ? 1 : 0;
  return rec;
}

// Minimal Bayes error of the centralized LLR test with equal priors after k
// samples: Q(sqrt(2 k C_tot)).
inline double centralized_error_probability(const DerivedStats& stats,
                                            long k) {
  if (k < 1)
    throw std::invalid_argument("centralized_error_probability: k >= 1");
  return q_function(std::sqrt(2.0 * k * stats.c_tot));
}

inline double centralized_log_error_probability(const DerivedStats& stats,
                                                long k) {
  if (k < 1)
    throw std::invalid_argument("centralized_error_probability: k >= 1");
  return log_q_function(std::sqrt(2.0 * k * stats.c_tot));
}

// Bayes error of sensor i running alone (no cooperation): Q(sqrt(2 k C_i)).
inline double no_cooperation_error_probability(const ObservationModel& model,
                                               int i, long k) {
  if (k < 1)
    throw std::invalid_argument("no_cooperation_error_probability: k >= 1");
  return q_function(std::sqrt(2.0 * k * chernoff_no_cooperation(model, i)));
}

inline double no_cooperation_log_error_probability(
    const ObservationModel& model, int i, long k) {
  if (k < 1)
    throw std::invalid_argument("no_cooperation_error_probability: k >= 1");
  return log_q_function(std::sqrt(2.0 * k * chernoff_no_cooperation(model, i)));
}

}  // namespace runcons
