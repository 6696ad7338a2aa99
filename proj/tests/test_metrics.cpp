#include "doctest.h"

#include <cmath>

#include "compinv/dataset.hpp"
#include "compinv/linear_inverse.hpp"
#include "compinv/metrics.hpp"
#include "compinv/systems.hpp"

using namespace compinv;

TEST_CASE("l2_error_percent") {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 1;
  CHECK(l2_error_percent(a, a) == 0.0);
  CHECK(l2_error_percent(a, b) == doctest::Approx(100.0 * std::sqrt(2.0)).epsilon(1e-14));

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2), e(2, 2);
  e << 0.01, 0, 0, 0.03;
  CHECK(l2_error_percent(t, e) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(l2_error_percent(t, e.leftCols(1)), ValidationError);
  CHECK_THROWS_AS(l2_error_percent(Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)), ValidationError);
}

TEST_CASE("aad_percent") {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(1, 3), e(1, 3);
  e << 0.01, 0, -0.02;
  CHECK(aad_percent(t, t).isZero());
  const Eigen::VectorXd a = aad_percent(t, e);
  CHECK(a(0) == doctest::Approx(1.0));
  CHECK(a(1) == 0.0);
  CHECK(a(2) == doctest::Approx(2.0));

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = sample_uniform_simplex(4, 50, rng);
    const Eigen::MatrixXd y = sample_uniform_simplex(4, 50, rng);
    CHECK(aad_percent(x, y).mean() <= l2_error_percent(x, y));
  }
}

TEST_CASE("normalized_truth") {
  const Eigen::Vector4d m(0.0, 0.4, 0.4, 0.2);
  // visible components 1..3 of m = [0.4, 0.4, 0.0, 0.2] in the reversed layout
  const Eigen::Vector4d m2(0.4, 0.4, 0.0, 0.2);
  const Eigen::VectorXd n = normalized_truth(m2, {0, 1, 2});
  CHECK(n(0) == doctest::Approx(0.5));
  CHECK(n(1) == doctest::Approx(0.5));
  CHECK(n(2) == 0.0);
  CHECK(normalized_truth(m, {0, 1, 2, 3}) == Eigen::VectorXd(m));
  CHECK_THROWS_AS(normalized_truth(m2, {0, 7}), ValidationError);
  CHECK_THROWS_AS(normalized_truth(Eigen::Vector2d(0, 1), {0}), ValidationError);

  Rng rng(2);
  const Eigen::MatrixXd X = Sampler::uniform(4, {3}, 0.2).draw(1000, rng);
  const Eigen::MatrixXd N = normalized_truth_rows(X, {0, 1, 2});
  for (Index i = 0; i < N.rows(); ++i) CHECK(std::abs(N.row(i).sum() - 1.0) < 1e-15);
}

TEST_CASE("projection_residual") {
  Rng rng(3);
  const Eigen::MatrixXd H = build_gaussian_matrix(6, 3, rng);
  const Eigen::VectorXd m = sample_uniform_simplex(3, 1, rng).transpose();
  CHECK(projection_residual(H * m, H * m) == 0.0);

  // pure noise in L = 1000: residual norm concentrates at sigma sqrt(L)
  const Index n = 10000;
  double acc = 0.0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1000);
  for (Index t = 0; t < n; ++t) acc += projection_residual(add_noise(zero, 0.005, rng), zero);
  CHECK(std::abs(acc / n / (0.005 * std::sqrt(1000.0)) - 1.0) < 0.02);

  // Pythagoras for a split into range(H) and its complement
  const Eigen::MatrixXd P = H * pseudo_inverse(H);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd s(6);
    for (Index i = 0; i < 6; ++i) s(i) = rng.normal();
    const Eigen::VectorXd in = P * s;
    const double total = std::pow(projection_residual(s, Eigen::VectorXd::Zero(6)), 2);
    const double a = std::pow(projection_residual(s, in), 2);
    const double b = std::pow(projection_residual(in, Eigen::VectorXd::Zero(6)), 2);
    CHECK(total == doctest::Approx(a + b).epsilon(1e-12));
  }
}

TEST_CASE("intensity_ratio") {
  Rng rng(4);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const ForwardSystem a = ForwardSystem::linear(H);
  const ForwardSystem twice = ForwardSystem::linear(2.0 * H);
  const Sampler s = Sampler::uniform(3);
  Rng r1(5), r2(5);
  CHECK(intensity_ratio(a, a, s, 1000, r1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(intensity_ratio(a, twice, s, 1000, r2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(intensity_ratio(a, ForwardSystem::linear(build_gaussian_matrix(5, 4, rng)), s, 10, r1),
                  ValidationError);
}

TEST_CASE("summarize") {
  Eigen::MatrixXd t(2, 2), e(2, 2);
  t << 1, 0, 0, 1;
  e << 0.99, 0.01, 0, 1;
  const ErrorSummary s = summarize("x", t, e);
  CHECK(s.estimator_tag == "x");
  CHECK(s.n == 2);
  CHECK(s.e_percent == doctest::Approx(100.0 * std::sqrt(2e-4) / 2));
  CHECK(s.aad_mean_percent == doctest::Approx(0.5));
}
