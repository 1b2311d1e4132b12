#include <doctest.h>

#include <vector>

#include "oracles.hpp"
#include "runcons/detectors.hpp"
#include "runcons/network.hpp"

using namespace runcons;

namespace {

ObservationModel scalar_model() {
  Vector m0(1), m1(1);
  m0 << 0.0;
  m1 << 1.0;
  return {m0, m1, SpdMatrix{Matrix::Identity(1, 1)}};
}

ObservationModel random_model(int n, std::uint64_t seed) {
  SplitStream rng(RngSeed{seed, 31});
  Vector m0(n), m1(n);
  for (int i = 0; i < n; ++i) {
    m0[i] = rng.next_unit() - 0.5;
    m1[i] = m0[i] + rng.next_unit_positive();
  }
  return {m0, m1, generate_random_covariance(n, 1.0, RngSeed{seed, 32})};
}

}  // namespace

TEST_CASE("eta distribution for the scalar model") {
  const DerivedStats st = derive_stats(scalar_model());
  const EtaSampler eta(st);
  SplitStream rng(RngSeed{41, 0});
  const int n = 100000;
  double s0 = 0.0, s1 = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e0 = eta.sample(0, rng)[0];
    const double e1 = eta.sample(1, rng)[0];
    s0 += e0;
    s1 += e1;
    sq += (e0 + 0.5) * (e0 + 0.5);
  }
  const double band = 3.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(s0 / n + 0.5) < band);   // mean -1/2 under H0
  CHECK(std::abs(s1 / n - 0.5) < band);   // mean +1/2 under H1
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));  // unit variance
}

TEST_CASE("eta sample means match m_eta componentwise") {
  const ObservationModel model = random_model(4, 7);
  const DerivedStats st = derive_stats(model);
  const EtaSampler eta(st);
  SplitStream rng(RngSeed{42, 0});
  const int n = 100000;
  Vector acc = Vector::Zero(4);
  for (int i = 0; i < n; ++i) acc += eta.sample(0, rng);
  acc /= n;
  for (int i = 0; i < 4; ++i) {
    const double sd = std::sqrt(st.s_eta(i, i));
    CHECK(std::abs(acc[i] - st.m_eta0[i]) <
          3.0 * sd / std::sqrt(static_cast<double>(n)) + 1e-12);
  }
}

TEST_CASE("eta under the two hypotheses mirrors through z") {
  const ObservationModel model = random_model(3, 8);
  const EtaSampler eta(derive_stats(model));
  SplitStream rng(RngSeed{43, 0});
  Vector z(3), out0(3), out1(3);
  for (int rep = 0; rep < 100; ++rep) {
    for (int i = 0; i < 3; ++i) z[i] = rng.next_normal();
    eta.from_z(0, z, out0);
    eta.from_z(1, -z, out1);
    CHECK(out0 == -out1);  // exact negation
  }
}

TEST_CASE("consensus step closed cases") {
  Vector eta1(2), eta2(2);
  eta1 << 1.0, 3.0;
  eta2 << 0.5, -0.5;
  const ConsensusState s1 = consensus_init(eta1);

  const ConsensusState id_next =
      consensus_step(s1, Matrix::Identity(2, 2), eta2);
  CHECK((id_next.x - 0.5 * (eta1 + eta2)).cwiseAbs().maxCoeff() < 1e-15);

  const ConsensusState j_next =
      consensus_step(s1, Matrix::Constant(2, 2, 0.5), eta2);
  Vector expect = 0.5 * (Vector::Constant(2, 2.0) + eta2);
  CHECK((j_next.x - expect).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(consensus_step(s1, Matrix::Identity(3, 3), eta2),
                  std::invalid_argument);
}

TEST_CASE("recursion and closed form agree to 1e-12") {
  SplitStream rng(RngSeed{44, 0});
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + static_cast<int>(rng.next_unit() * 4);  // 2..5
    const long k = 2 + static_cast<long>(rng.next_unit() * 19);  // 2..20
    WeightSampler sampler{rep % 2 == 0
                              ? WeightModel{SwitchingFusion{n, 0.5}}
                              : WeightModel{LinkFailureMetropolis{
                                    geometric_supergraph(
                                        n, 1.2, 0.6,
                                        RngSeed{static_cast<std::uint64_t>(rep),
                                                90})}}};
    std::vector<Matrix> weights;
    std::vector<Vector> etas;
    Matrix w(n, n);
    for (long j = 0; j < k; ++j) {
      Vector e(n);
      for (int i = 0; i < n; ++i) e[i] = 2.0 * rng.next_unit() - 1.0;
      etas.push_back(e);
      if (j + 1 < k) {
        sampler.sample_dense(rng, w);
        weights.push_back(w);
      }
    }
    ConsensusState state = consensus_init(etas[0]);
    for (long j = 1; j < k; ++j)
      state = consensus_step(state, weights[j - 1], etas[j]);
    const Vector direct = closed_form_state(weights, etas);
    CHECK((state.x - direct).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("closed form special cases") {
  Vector e1(2), e2(2);
  e1 << 2.0, 0.0;
  e2 << 0.0, 4.0;
  const std::vector<Vector> etas{e1, e2};
  const std::vector<Matrix> w{Matrix::Constant(2, 2, 0.5)};
  const Vector x2 = closed_form_state(w, etas);
  CHECK((x2 - 0.5 * (w[0] * e1 + e2)).cwiseAbs().maxCoeff() < 1e-15);

  const std::vector<Matrix> ident(3, Matrix::Identity(2, 2));
  const std::vector<Vector> four{e1, e2, e1, e2};
  const Vector x4 = closed_form_state(ident, four);
  CHECK((x4 - 0.25 * (2.0 * e1 + 2.0 * e2)).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(closed_form_state(ident, etas), std::invalid_argument);
}

TEST_CASE("trajectories under H0 and H1 are exact negations") {
  const ObservationModel model = random_model(4, 12);
  const EtaSampler eta(derive_stats(model));
  WeightSampler sampler{LinkFailureMetropolis{
      geometric_supergraph(4, 1.0, 0.5, RngSeed{45, 0})}};
  SplitStream z_rng(RngSeed{46, 0});
  SplitStream w_rng_a(RngSeed{47, 0});
  SplitStream w_rng_b(RngSeed{47, 0});
  Vector z(4), e0(4), e1(4), y(4);
  for (int i = 0; i < 4; ++i) z[i] = z_rng.next_normal();
  eta.from_z(0, z, e0);
  eta.from_z(1, -z, e1);
  ConsensusState a = consensus_init(e0);
  ConsensusState b = consensus_init(e1);
  Matrix w(4, 4);
  for (long k = 1; k <= 30; ++k) {
    sampler.sample_dense(w_rng_a, w);
    for (int i = 0; i < 4; ++i) z[i] = z_rng.next_normal();
    eta.from_z(0, z, e0);
    a = consensus_step(a, w, e0);
    sampler.sample_dense(w_rng_b, w);
    eta.from_z(1, -z, e1);
    b = consensus_step(b, w, e1);
    CHECK(a.x == -b.x);
  }
}

TEST_CASE("single sensor with full fusion reduces to the centralized test") {
  // with N = 1, x(k) is the running mean of the LLR contributions, so the
  // zero-threshold decision equals the centralized LLR decision
  const DerivedStats st = derive_stats(scalar_model());
  const EtaSampler eta(derive_stats(scalar_model()));
  SplitStream rng(RngSeed{48, 0});
  Vector x(1);
  double llr_sum = 0.0;
  Vector draw(1);
  draw = eta.sample(0, rng);
  x = draw;
  llr_sum = draw[0];
  for (long k = 1; k <= 200; ++k) {
    draw = eta.sample(0, rng);
    llr_sum += draw[0];
    x = (static_cast<double>(k) / (k + 1)) * x +
        (1.0 / (k + 1)) * draw;
    CHECK((x[0] > 0.0) == (llr_sum > 0.0));
  }
  (void)st;
}

TEST_CASE("zero decision variable maps to H0") {
  ConsensusState s{5, Vector::Zero(3)};
  const DecisionRecord rec = decide(s);
  CHECK(rec.decisions == std::vector<int>{0, 0, 0});
}

TEST_CASE("centralized error probability") {
  Vector m0(1), m1(1);
  m0 << 0.0;
  m1 << 1.0;
  const DerivedStats st = derive_stats(scalar_model());
  CHECK(st.c_tot == doctest::Approx(0.125));
  CHECK(centralized_error_probability(st, 1) ==
        doctest::Approx(0.308537538725987).epsilon(1e-12));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DerivedStats rs = derive_stats(random_model(3, 300 + seed));
    for (long k : {1L, 10L, 250L}) {
      const double via_moments =
          q_function(std::sqrt(static_cast<double>(k)) * rs.m_l1 /
                     std::sqrt(rs.sigma_l2));
      CHECK(centralized_error_probability(rs, k) ==
            doctest::Approx(via_moments).epsilon(1e-12));
    }
  }
}

TEST_CASE("centralized error at k = 100 with C_tot = 0.1") {
  Vector m0(1), m1(1), s(1);
  m0 << 0.0;
  m1 << 1.0;
  s << 1.25;  // C = 1/(8 * 1.25) = 0.1
  const DerivedStats st =
      derive_stats({m0, m1, SpdMatrix{Matrix(s.asDiagonal())}});
  CHECK(st.c_tot == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(centralized_error_probability(st, 100) ==
        doctest::Approx(3.87210821552205e-06).epsilon(1e-10));
}

TEST_CASE("no-cooperation error probability") {
  const ObservationModel model = scalar_model();
  CHECK(no_cooperation_error_probability(model, 0, 1) ==
        doctest::Approx(0.308537538725987).epsilon(1e-12));
  // the 1-sensor restriction is the centralized detector of that sensor
  const DerivedStats st = derive_stats(model);
  for (long k : {1L, 7L, 40L})
    CHECK(no_cooperation_error_probability(model, 0, k) ==
          doctest::Approx(centralized_error_probability(st, k))
              .epsilon(1e-13));
}

TEST_CASE("no-cooperation rate approaches C_i") {
  const ObservationModel model = scalar_model();  // C_i = 0.125
  const long k = 10000;
  const double rate =
      -no_cooperation_log_error_probability(model, 0, k) / k;
  CHECK(std::abs(rate - 0.125) / 0.125 < 0.02);
}
