#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "compinv/dataset.hpp"
#include "compinv/linear_inverse.hpp"
#include "compinv/systems.hpp"

using namespace compinv;

TEST_CASE("gaussian matrix is seed-determined") {
  Rng a(3), b(3), c(4);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, a);
  CHECK(H == build_gaussian_matrix(5, 3, b));
  CHECK(H != build_gaussian_matrix(5, 3, c));
  CHECK(std::isfinite(condition_number(H)));
  CHECK_THROWS_AS(build_gaussian_matrix(2, 3, a), ValidationError);
}

TEST_CASE("rbf matrix") {
  const Eigen::MatrixXd H = build_rbf_matrix();
  CHECK(H.rows() == 1000);
  CHECK(H.cols() == 20);
  CHECK(H.minCoeff() >= -1e-12);
  const double k = condition_number(H);
  CHECK(k >= 300.0);
  CHECK(k <= 420.0);
  // column 12 (0-based 11) is normalized by its own maximum
  CHECK(H.col(11).maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(build_rbf_matrix(500), ValidationError);
}

TEST_CASE("g transforms") {
  const Eigen::Vector3d z = g_invertible(Eigen::Vector3d(0, 1, 0));
  CHECK(z(0) == 0.0);
  CHECK(z(1) == doctest::Approx(1.1));
  CHECK(z(2) == 0.0);

  const Eigen::Vector3d clamped = g_invertible_inv(Eigen::Vector3d(-0.3, 0.05, 0.4));
  CHECK(clamped(0) == 0.0);
  CHECK(clamped(1) == 0.0);
  CHECK(clamped(2) == 0.4);

  Rng rng(12);
  const Eigen::MatrixXd X = sample_uniform_simplex(3, 500, rng);
  for (Index i = 0; i < X.rows(); ++i) {
    const Eigen::Vector3d m = X.row(i).transpose();
    CHECK((g_invertible_inv(g_invertible(m)) - m).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("thresholded exponential") {
  CHECK(g3(0.5, 0.4) == doctest::Approx(std::exp(0.1) - 1.0).epsilon(1e-14));
  CHECK(g3(0.5, 0.4) == doctest::Approx(0.105171).epsilon(1e-6));
  CHECK(g3(0.01, 0.02) == 0.0);
  CHECK(g3_inv(0.0, 0.1) == doctest::Approx(0.05));
  // deep negative noise still lands in the threshold region
  CHECK(g3_inv(-5.0, 0.1) == doctest::Approx(0.05));
  for (double x : {0.021, 0.05, 0.3, 0.7, 1.0})
    CHECK(g3_inv(g3(x, 0.02), 0.02) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("apply invertible-g") {
  Rng rng(1);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const ForwardSystem sys = ForwardSystem::invertible_g(H);
  const Eigen::Vector3d m(0.25, 0.25, 0.5);
  const Eigen::VectorXd expect = H * Eigen::Vector3d(0.0625, 0.6, 0.5);
  CHECK((sys.apply(m) - expect).norm() < 1e-14);
  CHECK(sys.has_linear_core());
  CHECK_THROWS_AS(sys.apply(Eigen::VectorXd::Constant(4, 0.25)), ValidationError);
}

TEST_CASE("apply noninvertible-g below threshold") {
  Rng rng(1);
  const ForwardSystem sys = ForwardSystem::noninvertible_g(build_gaussian_matrix(5, 3, rng));
  const Eigen::VectorXd z = sys.intermediates(Eigen::Vector3d(0.5, 0.49, 0.01));
  CHECK(z(2) == 0.0);
}

TEST_CASE("scaled magnitude against a direct evaluation") {
  Rng rng(2);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const ForwardSystem sys = ForwardSystem::scaled_magnitude(H);
  const Eigen::MatrixXd X = sample_uniform_simplex(3, 100, rng);
  for (Index i = 0; i < X.rows(); ++i) {
    Eigen::VectorXd hm = Eigen::VectorXd::Zero(5);
    for (Index r = 0; r < 5; ++r)
      for (Index c = 0; c < 3; ++c) hm(r) += H(r, c) * X(i, c);
    double n2 = 0.0;
    for (Index r = 0; r < 5; ++r) n2 += hm(r) * hm(r);
    const Eigen::VectorXd got = sys.apply(X.row(i).transpose());
    CHECK((got - n2 * hm).norm() <= 1e-12 * (1.0 + got.norm()));
  }
}

TEST_CASE("obfuscated systems") {
  Rng rng(3);
  const ForwardSystem sys = ForwardSystem::obfuscated_invertible(build_gaussian_matrix(5, 4, rng));
  CHECK(sys.input_dim() == 4);
  CHECK(sys.visible_dim() == 3);
  CHECK(sys.obfuscating_indices() == std::vector<Index>{3});
  CHECK(sys.visible_indices() == std::vector<Index>{0, 1, 2});
  CHECK(sys.linear_core().cols() == 3);
}

TEST_CASE("moving peak systems") {
  const ForwardSystem peak = ForwardSystem::moving_peak();
  CHECK(peak.observation_dim() == 5);
  CHECK(peak.input_dim() == 3);
  CHECK_FALSE(peak.has_linear_core());
  const Eigen::VectorXd y = peak.apply(Eigen::Vector3d(1, 0, 0));
  CHECK(y.allFinite());
  CHECK_THROWS_AS(peak.linear_core(), ValidationError);
}

TEST_CASE("high-dimensional nonlinear system") {
  const Eigen::MatrixXd H = build_rbf_matrix();
  const ForwardSystem sys = ForwardSystem::highdim_nonlinear(H);
  CHECK(sys.input_dim() == 20);
  CHECK(sys.visible_dim() == 18);
  CHECK(sys.observation_dim() == 1000);
  CHECK(sys.obfuscating_indices() == std::vector<Index>{18, 19});

  // pure fourth component: only the moving peak at 300 contributes
  Eigen::VectorXd e4 = Eigen::VectorXd::Zero(20);
  e4(3) = 1.0;
  const Eigen::VectorXd y = sys.apply(e4);
  CHECK((y - 0.6 * radial_basis(1000, 300.0, 40.0)).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::VectorXd m = Eigen::VectorXd::Constant(20, 1.0 / 20);
  m(8) = 0.03;
  m(0) += 0.05 - 0.03;
  CHECK(sys.intermediates(m)(8) == 0.0);
  m(8) = 0.02;
  m(0) += 0.01;
  CHECK(sys.intermediates(m)(8) == 0.0);

  const ForwardSystem l2 = ForwardSystem::highdim_nonlinear(H, SystemKind::HighdimNonlinearL2Norm);
  const ForwardSystem mx = ForwardSystem::highdim_nonlinear(H, SystemKind::HighdimNonlinearMaxNorm);
  Rng rng(4);
  const Eigen::MatrixXd X = sample_uniform_simplex(20, 20, rng);
  for (Index i = 0; i < X.rows(); ++i) {
    CHECK(l2.apply(X.row(i).transpose()).norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mx.apply(X.row(i).transpose()).maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("system kind tags round trip") {
  for (SystemKind k : {SystemKind::Linear, SystemKind::InvertibleG, SystemKind::NoninvertibleG,
                       SystemKind::ObfuscatedInvertible, SystemKind::ObfuscatedNoninvertible,
                       SystemKind::ScaledMagnitude, SystemKind::Correlated, SystemKind::MovingPeak,
                       SystemKind::MovingPeakCorrelated, SystemKind::HighdimLinear,
                       SystemKind::HighdimNonlinear, SystemKind::HighdimNonlinearMaxNorm,
                       SystemKind::HighdimNonlinearL2Norm})
    CHECK(system_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(system_kind_from_string("cubic"), ValidationError);
}

TEST_CASE("add_noise") {
  Rng rng(5);
  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(7, 0, 1);
  CHECK(add_noise(s, 0.0, rng) == s);

  Rng a(6), b(6);
  CHECK(add_noise(s, 0.1, a) == add_noise(s, 0.1, b));

  const Index n = 1000000;
  const Eigen::MatrixXd noisy = add_noise_rows(Eigen::MatrixXd::Zero(n, 2), 0.005, rng);
  for (Index j = 0; j < 2; ++j) {
    const double mean = noisy.col(j).mean();
    const double sd = std::sqrt((noisy.col(j).array() - mean).square().sum() / (n - 1));
    CHECK(std::abs(sd / 0.005 - 1.0) < 0.01);
  }
  CHECK_THROWS_AS(add_noise(s, -1.0, rng), ValidationError);
}

TEST_CASE("generate_dataset") {
  Rng rng(7);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const ForwardSystem sys = ForwardSystem::linear(H);
  const Sampler uni = Sampler::uniform(3);

  const PairedDataset d = generate_dataset(sys, uni, 10000, 0.005, 42);
  CHECK(d.X.rows() == 10000);
  CHECK(d.X.cols() == 3);
  CHECK(d.Y.rows() == 10000);
  CHECK(d.Y.cols() == 5);
  CHECK_NOTHROW(d.validate());

  const PairedDataset again = generate_dataset(sys, uni, 10000, 0.005, 42);
  CHECK(again.X == d.X);
  CHECK(again.Y == d.Y);

  const PairedDataset clean = generate_dataset(sys, uni, 500, 0.0, 43);
  CHECK(clean.Y == clean.X * H.transpose());

  const auto dir = std::filesystem::temp_directory_path() / "compinv_test_dataset";
  std::filesystem::create_directories(dir);
  write_dataset(clean, dir / "clean");
  const PairedDataset back = read_dataset(dir / "clean");
  CHECK(back.X == clean.X);
  CHECK(back.Y == clean.Y);
  std::filesystem::remove_all(dir);
}

TEST_CASE("samplers") {
  Rng rng(8);
  const Sampler capped = Sampler::uniform(4, {3}, 0.2);
  const Eigen::MatrixXd X = capped.draw(2000, rng);
  CHECK(rows_on_simplex(X, 1e-9));
  CHECK(X.col(3).maxCoeff() <= 0.2);

  const Sampler ends = Sampler::end_members(4, {3});
  CHECK(ends.end_member_count() == 3);
  const Eigen::MatrixXd E = ends.draw(3, rng);
  CHECK(E.topLeftCorner(3, 3) == Eigen::MatrixXd::Identity(3, 3));
  CHECK(E.col(3).isZero());
}
