#pragma once

#include <json.hpp>
#include <optional>
#include <utility>

#include "runcons/errors.hpp"
#include "runcons/json_util.hpp"
#include "runcons/linalg.hpp"

namespace runcons {

// Two-hypothesis Gaussian sensing model: y(k) = m_l + noise, noise ~ N(0, S).
class ObservationModel {
 public:
  ObservationModel(Vector m0, Vector m1, SpdMatrix s, double prior_h0 = 0.5)
      : m0_(std::move(m0)),
        m1_(std::move(m1)),
        s_(std::move(s)),
        prior_h0_(prior_h0) {
    if (m0_.size() != m1_.size() || m0_.size() != s_.dim())
      throw std::invalid_argument("ObservationModel: dimension mismatch");
    if ((m1_ - m0_).cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument(
          "ObservationModel: hypotheses are indistinguishable (m1 == m0)");
    if (!(prior_h0_ > 0.0 && prior_h0_ < 1.0))
      throw std::invalid_argument("ObservationModel: prior_h0 must be in (0,1)");
  }

  int size() const { return static_cast<int>(m0_.size()); }
  const Vector& m0() const { return m0_; }
  const Vector& m1() const { return m1_; }
  const SpdMatrix& s() const { return s_; }
  double prior_h0() const { return prior_h0_; }

 private:
  Vector m0_;
  Vector m1_;
  SpdMatrix s_;
  double prior_h0_;
};

inline bool is_diagonal(const Matrix& m, double rel_tol = 1e-12) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  double max_off = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) max_off = std::max(max_off, std::abs(m(i, j)));
  return max_off <= rel_tol * scale;
}

// Everything derived from (m0, m1, S).
struct DerivedStats {
  int n = 0;
  Vector v;          // S^{-1} (m1 - m0)
  double sigma_l2 = 0.0;  // LLR variance under either hypothesis
  double m_l1 = 0.0;      // LLR mean under H1 ( = sigma_l2 / 2 )
  double m_l0 = 0.0;      // LLR mean under H0 ( = -m_l1 )
  double c_tot = 0.0;     // total Chernoff information, sigma_l2 / 8
  std::optional<Vector> c_i;  // per-sensor Chernoff info; diagonal S only
  Vector m_eta0;          // mean of the per-sensor LLR contribution, H0
  Vector m_eta1;          //   "  under H1 ( = -m_eta0 )
  Matrix s_eta;           // diag(v) S diag(v)
  double s_eta_norm = 0.0;  // spectral norm of s_eta
  double m_bar = 0.0;       // max_i |[m_eta0]_i|
  double k_ratio = 0.0;     // 8 m_bar / s_eta_norm
};

inline DerivedStats derive_stats(const ObservationModel& model) {
  const Matrix& s = model.s().entries();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw numeric_error("derive_stats: eigenvalue computation failed");
  const double eig_min = eig.eigenvalues()[0];
  const double eig_max = eig.eigenvalues()[eig.eigenvalues().size() - 1];
  if (!(eig_min > 0.0) || eig_max / eig_min > 1e12)
    throw numeric_error("derive_stats: covariance is too ill-conditioned");

  DerivedStats st;
  st.n = model.size();
  const Vector d = model.m1() - model.m0();
  st.v = model.s().solve(d);
  st.sigma_l2 = d.dot(st.v);
  st.m_l1 = 0.5 * st.sigma_l2;
  st.m_l0 = -st.m_l1;
  st.c_tot = st.sigma_l2 / 8.0;
  if (is_diagonal(s)) {
    Vector ci(st.n);
    for (int i = 0; i < st.n; ++i) ci[i] = d[i] * d[i] / (8.0 * s(i, i));
    st.c_i = std::move(ci);
  }
  st.m_eta1 = 0.5 * st.v.cwiseProduct(d);
  st.m_eta0 = -st.m_eta1;
  st.s_eta = st.v.asDiagonal() * s * st.v.asDiagonal();
  st.s_eta = (0.5 * (st.s_eta + st.s_eta.transpose())).eval();
  st.s_eta_norm = spectral_norm_sym(st.s_eta);
  st.m_bar = st.m_eta0.cwiseAbs().maxCoeff();
  st.k_ratio = 8.0 * st.m_bar / st.s_eta_norm;
  return st;
}

// Chernoff information of sensor i run as an isolated detector,
// (1/8) [m1 - m0]_i^2 / S_ii. Defined for uncorrelated observations only.
inline double chernoff_no_cooperation(const ObservationModel& model, int i) {
  if (!is_diagonal(model.s().entries()))
    throw std::invalid_argument(
        "chernoff_no_cooperation: requires a diagonal covariance");
  if (i < 0 || i >= model.size())
    throw std::invalid_argument("chernoff_no_cooperation: sensor out of range");
  const double delta = model.m1()[i] - model.m0()[i];
  if (delta == 0.0)
    throw std::invalid_argument(
        "chernoff_no_cooperation: sensor carries no signal difference");
  return delta * delta / (8.0 * model.s().entries()(i, i));
}

inline nlohmann::json model_to_json(const ObservationModel& model) {
  const int n = model.size();
  nlohmann::json j;
  j["n"] = n;
  j["m0"] = std::vector<double>(model.m0().data(), model.m0().data() + n);
  j["m1"] = std::vector<double>(model.m1().data(), model.m1().data() + n);
  std::vector<double> s_flat;
  s_flat.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) s_flat.push_back(model.s().entries()(i, k));
  j["S"] = s_flat;
  j["prior_h0"] = model.prior_h0();
  return j;
}

inline ObservationModel model_from_json(const nlohmann::json& j) {
  const int n = detail::require_field(j, "n").get<int>();
  if (n < 1) throw schema_error("model.n must be >= 1");
  Vector m0 = detail::json_to_vector(detail::require_field(j, "m0"), "m0");
  Vector m1 = detail::json_to_vector(detail::require_field(j, "m1"), "m1");
  Vector s_flat = detail::json_to_vector(detail::require_field(j, "S"), "S");
  if (m0.size() != n || m1.size() != n)
    throw schema_error("model.m0/m1 must have length n");
  if (s_flat.size() != static_cast<Eigen::Index>(n) * n)
    throw schema_error("model.S must have n*n row-major entries");
  Matrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) s(i, k) = s_flat[i * n + k];
  const double prior = j.value("prior_h0", 0.5);
  try {
    return ObservationModel(std::move(m0), std::move(m1), SpdMatrix(s), prior);
  } catch (const std::invalid_argument& e) {
    throw schema_error(std::string("model: ") + e.what());
  }
}

}  // namespace runcons
