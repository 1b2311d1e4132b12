#include <doctest.h>

#include <algorithm>
#include <vector>

#include "runcons/linalg.hpp"

using namespace runcons;

TEST_CASE("SpdMatrix validates symmetry and positive definiteness") {
  Matrix good(2, 2);
  good << 2.0, 0.5, 0.5, 1.0;
  CHECK_NOTHROW(SpdMatrix{good});

  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.5, 1.0;
  CHECK_THROWS_AS(SpdMatrix{asym}, std::invalid_argument);

  Matrix indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(SpdMatrix{indef}, numeric_error);
}

TEST_CASE("lambda2 on spectra known in closed form") {
  CHECK(lambda2(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-12));

  const Matrix j4 = Matrix::Constant(4, 4, 0.25);
  CHECK(lambda2(j4) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const double p = 0.3;
  const int n = 5;
  const Matrix mix = p * Matrix::Constant(n, n, 1.0 / n) +
                     (1.0 - p) * Matrix::Identity(n, n);
  CHECK(lambda2(mix) == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("lambda2 rejects asymmetric input") {
  Matrix m(3, 3);
  m.setZero();
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(lambda2(m), std::domain_error);
}

TEST_CASE("lambda2 keeps full accuracy at N = 200") {
  const int n = 200;
  const double p = 0.37;
  const Matrix mix = p * Matrix::Constant(n, n, 1.0 / n) +
                     (1.0 - p) * Matrix::Identity(n, n);
  CHECK(std::abs(lambda2(mix) - (1.0 - p)) < 1e-10);
}

TEST_CASE("sample_gaussian is deterministic in the seed") {
  const SpdMatrix cov{Matrix::Identity(3, 3)};
  const Vector mean = Vector::Zero(3);
  const Vector a = sample_gaussian(mean, cov, RngSeed{9, 1});
  const Vector b = sample_gaussian(mean, cov, RngSeed{9, 1});
  CHECK(a == b);
  const Vector c = sample_gaussian(mean, cov, RngSeed{9, 2});
  CHECK(a != c);
}

TEST_CASE("sample_gaussian covariance matches the target") {
  const int n = 3;
  Matrix s(n, n);
  s << 2.0, 0.6, 0.1, 0.6, 1.0, -0.2, 0.1, -0.2, 0.5;
  const SpdMatrix cov{s};
  const Vector mean = Vector::Zero(n);
  SplitStream rng(RngSeed{10, 0});
  const int draws = 100000;
  Matrix acc = Matrix::Zero(n, n);
  Vector mean_acc = Vector::Zero(n);
  for (int i = 0; i < draws; ++i) {
    const Vector x = sample_gaussian(mean, cov, rng);
    acc.noalias() += x * x.transpose();
    mean_acc += x;
  }
  mean_acc /= draws;
  const Matrix sample_cov =
      acc / draws - mean_acc * mean_acc.transpose();
  CHECK(spectral_norm_sym(sample_cov - s) < 0.05 * spectral_norm_sym(s));
}

TEST_CASE("sample_gaussian mean translation") {
  const SpdMatrix cov{Matrix::Identity(2, 2)};
  Vector mean(2);
  mean << 3.0, 3.0;
  SplitStream rng(RngSeed{13, 0});
  const int draws = 40000;
  Vector acc = Vector::Zero(2);
  for (int i = 0; i < draws; ++i) acc += sample_gaussian(mean, cov, rng);
  acc /= draws;
  const double band = 3.0 / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(acc[0] - 3.0) < band);
  CHECK(std::abs(acc[1] - 3.0) < band);
}

TEST_CASE("random covariance spectrum equals alpha * u as a multiset") {
  const double alpha = 2.5;
  const auto draw = generate_random_covariance_draw(6, alpha, RngSeed{21, 0});
  Eigen::SelfAdjointEigenSolver<Matrix> eig(draw.s.entries(),
                                            Eigen::EigenvaluesOnly);
  std::vector<double> got(eig.eigenvalues().data(),
                          eig.eigenvalues().data() + 6);
  std::vector<double> want(draw.u.data(), draw.u.data() + 6);
  for (auto& w : want) w *= alpha;
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  for (int i = 0; i < 6; ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("covariance assembly with unit spectrum gives the identity") {
  const auto draw = generate_random_covariance_draw(5, 1.0, RngSeed{22, 0});
  const Matrix s = assemble_covariance(draw.q, Vector::Ones(5), 1.0);
  CHECK((s - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random covariance passes the SPD certificate across seeds") {
  for (int n : {2, 5, 40}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      // SpdMatrix construction is the certificate: Cholesky must succeed
      const SpdMatrix s = generate_random_covariance(n, 1.0, RngSeed{seed, 3});
      CHECK(is_symmetric(s.entries()));
      CHECK(s.cholesky_factor().diagonal().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("random covariance rejects bad arguments") {
  CHECK_THROWS_AS(generate_random_covariance(0, 1.0, RngSeed{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_random_covariance(3, 0.0, RngSeed{}),
                  std::invalid_argument);
}
