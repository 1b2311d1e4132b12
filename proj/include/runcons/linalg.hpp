#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <utility>

#include "runcons/errors.hpp"
#include "runcons/rng.hpp"

namespace runcons {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// Symmetric positive definite matrix. Validates on construction and keeps
// the Cholesky factor around for sampling and solves.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
      throw std::invalid_argument("SpdMatrix: need a nonempty square matrix");
    if (!is_symmetric(entries_))
      throw std::invalid_argument("SpdMatrix: matrix is not symmetric");
    entries_ = (0.5 * (entries_ + entries_.transpose())).eval();
    llt_.compute(entries_);
    if (llt_.info() != Eigen::Success)
      throw numeric_error("SpdMatrix: matrix is not positive definite");
  }

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  Matrix cholesky_factor() const { return llt_.matrixL(); }
  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

 private:
  Matrix entries_;
  Eigen::LLT<Matrix> llt_;
};

// Second largest eigenvalue by algebraic value, counting multiplicity.
inline double lambda2(const Matrix& sym) {
  if (sym.rows() != sym.cols() || sym.rows() < 2)
    throw std::domain_error("lambda2: need a square matrix of dimension >= 2");
  if (!is_symmetric(sym))
    throw std::domain_error("lambda2: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(
      0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw numeric_error("lambda2: eigenvalue computation failed");
  const auto& values = solver.eigenvalues();  // ascending
  return values[values.size() - 2];
}

// Spectral norm of a symmetric matrix (largest |eigenvalue|).
inline double spectral_norm_sym(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(
      0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw numeric_error("spectral_norm_sym: eigenvalue computation failed");
  const auto& values = solver.eigenvalues();
  return std::max(std::abs(values[0]), std::abs(values[values.size() - 1]));
}

// Draw from N(mean, cov) through the Cholesky factor of cov.
inline Vector sample_gaussian(const Vector& mean, const SpdMatrix& cov,
                              SplitStream& rng) {
  if (mean.size() != cov.dim())
    throw std::invalid_argument("sample_gaussian: dimension mismatch");
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.next_normal();
  return mean + cov.cholesky_factor() * z;
}

inline Vector sample_gaussian(const Vector& mean, const SpdMatrix& cov,
                              RngSeed seed) {
  SplitStream rng(seed);
  return sample_gaussian(mean, cov, rng);
}

// S = alpha * Q diag(u) Q^T, symmetrized against roundoff.
inline Matrix assemble_covariance(const Matrix& q_orth, const Vector& u,
                                  double alpha) {
  Matrix s = alpha * (q_orth * u.asDiagonal() * q_orth.transpose());
  return 0.5 * (s + s.transpose());
}

struct RandomCovarianceDraw {
  SpdMatrix s;
  Vector u;  // spectrum of s is alpha * u as a multiset
  Matrix q;  // orthogonal frame
};

// Random covariance recipe: M with i.i.d. U[0,1] entries, R = M M^T,
// eigenframe Q of R, then S = alpha * Q diag(u) Q^T with u i.i.d. U[0,1].
// A u with any entry below 1e-12 is redrawn so S stays invertible.
inline RandomCovarianceDraw generate_random_covariance_draw(int n,
                                                            double alpha_s,
                                                            RngSeed seed) {
  if (n < 1) throw std::invalid_argument("generate_random_covariance: n >= 1");
  if (!(alpha_s > 0.0))
    throw std::invalid_argument("generate_random_covariance: alpha_s > 0");
  SplitStream rng(seed);
  Matrix m_s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m_s(i, j) = rng.next_unit();
  const Matrix r_s = m_s * m_s.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(r_s);
  if (eig.info() != Eigen::Success)
    throw numeric_error("generate_random_covariance: eigendecomposition failed");
  const Matrix q = eig.eigenvectors();

  constexpr double kMinEigenvalue = 1e-12;
  Vector u(n);
  for (;;) {
    for (int i = 0; i < n; ++i) u[i] = rng.next_unit();
    if ((u.array() >= kMinEigenvalue).all()) break;
  }
  return {SpdMatrix(assemble_covariance(q, u, alpha_s)), u, q};
}

inline SpdMatrix generate_random_covariance(int n, double alpha_s,
                                            RngSeed seed) {
  return generate_random_covariance_draw(n, alpha_s, seed).s;
}

}  // namespace runcons
