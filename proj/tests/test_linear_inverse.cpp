#include "doctest.h"

#include <cmath>

#include "compinv/dataset.hpp"
#include "compinv/linear_inverse.hpp"
#include "compinv/systems.hpp"

using namespace compinv;

TEST_CASE("pseudo_inverse") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  CHECK((pseudo_inverse(I) - I).norm() < 1e-15);
  CHECK((pseudo_inverse(2.0 * I) - 0.5 * I).norm() < 1e-15);

  Rng rng(1);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  CHECK((pseudo_inverse(H) * H - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXd rankdef = H;
  rankdef.col(2) = rankdef.col(1);
  CHECK_THROWS_AS(pseudo_inverse(rankdef), RankDeficiencyError);
}

TEST_CASE("mle_system_matrix") {
  Rng rng(2);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const ForwardSystem sys = ForwardSystem::linear(H);
  const PairedDataset clean = generate_dataset(sys, Sampler::uniform(3), 50, 0.0, 3);
  const LinearFit exact = mle_system_matrix(clean.X, clean.Y, H);
  CHECK(*exact.frob_rel_err < 1e-10);

  const PairedDataset noisy = generate_dataset(sys, Sampler::uniform(3), 10000, 0.005, 4);
  const LinearFit fit = mle_system_matrix(noisy.X, noisy.Y, H);
  CHECK(*fit.frob_rel_err <= 2e-3);
  CHECK(fit.condition_number == doctest::Approx(condition_number(fit.H_hat)));

  // duplicated column: the composition Gram matrix is singular
  Eigen::MatrixXd X(4, 3);
  X << 0.5, 0.5, 0.0, 0.2, 0.2, 0.6, 0.3, 0.3, 0.4, 0.1, 0.1, 0.8;
  CHECK_THROWS_AS(mle_system_matrix(X, X * H.transpose()), RankDeficiencyError);
  CHECK_THROWS_AS(mle_system_matrix(X.topRows(2), X.topRows(2) * H.transpose()), RankDeficiencyError);
}

TEST_CASE("oracle estimate is exact without noise") {
  Rng rng(5);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const Eigen::MatrixXd X = sample_uniform_simplex(3, 200, rng);
  const ForwardSystem inv = ForwardSystem::invertible_g(H);
  const ComponentwiseInverse g_inv = [&inv](const Eigen::VectorXd& x) { return inv.core_inverse(x); };
  for (Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd m = X.row(i).transpose();
    CHECK((oracle_estimate(H, H * m).values() - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((oracle_estimate(H, inv.apply(m), g_inv).values() - m).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("unconstrained oracle error") {
  CHECK(unconstrained_oracle_error(Eigen::MatrixXd::Identity(3, 3), 0.005) ==
        doctest::Approx(0.5 * std::sqrt(3.0)).epsilon(1e-14));
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = 2.0;
  CHECK(unconstrained_oracle_error(D, 0.01) == doctest::Approx(1.1180339887).epsilon(1e-10));
  CHECK_THROWS_AS(unconstrained_oracle_error(D, -0.1), ValidationError);
}

TEST_CASE("oracle error against noise Monte Carlo") {
  Rng rng(6);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const Eigen::MatrixXd P = pseudo_inverse(H);
  const double sigma = 0.005;
  const Index n = 100000;
  double sq = 0.0;
  Eigen::VectorXd noise(5);
  for (Index t = 0; t < n; ++t) {
    for (Index i = 0; i < 5; ++i) noise(i) = sigma * rng.normal();
    sq += (P * noise).squaredNorm();
  }
  const double rms = 100.0 * std::sqrt(sq / n);
  CHECK(std::abs(rms / unconstrained_oracle_error(H, sigma) - 1.0) < 0.01);
}

TEST_CASE("obfuscated error bound") {
  Rng rng(7);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const Eigen::MatrixXd H1 = build_gaussian_matrix(5, 1, rng);
  const double sigma = 0.005;
  const double d = unconstrained_oracle_error(H, sigma) / 100.0;

  const ObfuscatedBound none = obfuscated_error_bound(H, Eigen::MatrixXd::Zero(5, 1), 0.3, sigma);
  CHECK(none.bound == doctest::Approx(d * d).epsilon(1e-14));
  const ObfuscatedBound empty = obfuscated_error_bound(H, H1, 0.0, sigma);
  CHECK(empty.bound == doctest::Approx(d * d).epsilon(1e-14));

  const ObfuscatedBound b = obfuscated_error_bound(H, H1, 0.1, sigma, Eigen::VectorXd::Constant(1, 0.1));
  REQUIRE(b.exact);
  CHECK(*b.exact <= b.bound);
  CHECK((pseudo_inverse(H) * H1 * 0.1).squaredNorm() <= b.obfuscating_term);
}

TEST_CASE("myopic residual bound") {
  Rng rng(8);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const Eigen::MatrixXd H1 = build_gaussian_matrix(5, 1, rng);
  const MyopicResidual r = myopic_residual_bound(H, H1, 0.0, 0.005);
  CHECK(r.noise_term == doctest::Approx(0.005 * 0.005 * 2));
  const MyopicResidual with = myopic_residual_bound(H, H1, 0.1, 0.005, Eigen::VectorXd::Constant(1, 0.1));
  REQUIRE(with.exact);
  CHECK(*with.exact >= with.noise_term);
}

TEST_CASE("thresholding floor") {
  CHECK(thresholding_floor(0.1).estimate == 0.05);
  CHECK(thresholding_floor(0.1).loss == doctest::Approx(0.009129).epsilon(1e-4));
  CHECK(100.0 * thresholding_floor(0.02).loss == doctest::Approx(0.0816497).epsilon(1e-6));
  CHECK(std::round(1000.0 * 100.0 * thresholding_floor(0.02).loss) / 1000.0 == 0.082);
  CHECK_THROWS_AS(thresholding_floor(0.0), ValidationError);

  // x over the whole unit interval; only the thresholded region [0, T) contributes
  for (double T : {0.02, 0.1}) {
    Rng rng(9);
    const Index n = 1000000;
    double sq = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double x = rng.uniform();
      if (x < T) sq += (x - T / 2) * (x - T / 2);
    }
    CHECK(std::abs(std::sqrt(sq / n) / thresholding_floor(T).loss - 1.0) < 0.02);
  }
}

TEST_CASE("estimator projects onto the simplex") {
  Rng rng(10);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const PseudoInverseEstimator est(H);
  const PairedDataset d = generate_dataset(ForwardSystem::linear(H), Sampler::uniform(3), 300, 0.05, 11);
  CHECK(rows_on_simplex(est.estimate_rows(d.Y), 1e-9));
}
