#include "doctest.h"

#include <cmath>

#include "compinv/errors.hpp"
#include "compinv/random.hpp"
#include "compinv/simplex.hpp"

using namespace compinv;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("is_on_simplex") {
  CHECK(is_on_simplex(vec({1, 0, 0}), 1e-9));
  CHECK_FALSE(is_on_simplex(vec({0.5, 0.5, 0.1}), 1e-9));
  CHECK(is_on_simplex(vec({0.2, 0.3, 0.5}), 1e-9));
  CHECK_FALSE(is_on_simplex(vec({1.2, -0.2}), 1e-9));
  CHECK_FALSE(is_on_simplex(Eigen::VectorXd(), 1e-9));
}

TEST_CASE("project_to_simplex") {
  const Eigen::VectorXd a = project_to_simplex(vec({0.5, -0.1, 0.8}));
  CHECK(a(0) == doctest::Approx(5.0 / 13).epsilon(1e-15));
  CHECK(a(1) == 0.0);
  CHECK(a(2) == doctest::Approx(8.0 / 13).epsilon(1e-15));

  const Eigen::VectorXd b = project_to_simplex(vec({0.25, 0.25}));
  CHECK(b(0) == 0.5);
  CHECK(b(1) == 0.5);

  // nothing survives the clamp: centroid
  const Eigen::VectorXd c = project_to_simplex(vec({-1, -2, -3}));
  for (Index i = 0; i < 3; ++i) CHECK(c(i) == doctest::Approx(1.0 / 3));

  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(6);
    for (Index i = 0; i < 6; ++i) x(i) = rng.normal();
    CHECK(is_on_simplex(project_to_simplex(x), 1e-12));
  }
}

TEST_CASE("composition validates") {
  CHECK_THROWS_AS(CompositionVector(vec({0.5, 0.6})), ValidationError);
  CHECK_NOTHROW(CompositionVector(vec({0.5, 0.5})));
  const auto e = CompositionVector::end_member(4, 2);
  CHECK(e(2) == 1.0);
  CHECK(e.values().sum() == 1.0);
}

TEST_CASE("uniform sampler moments") {
  Rng one(1);
  const Eigen::MatrixXd trivial = sample_uniform_simplex(1, 5, one);
  CHECK((trivial.array() == 1.0).all());

  Rng rng(2024);
  const Index n = 1000000;
  const Eigen::MatrixXd X = sample_uniform_simplex(5, n, rng);
  CHECK(rows_on_simplex(X, 1e-9));
  const double var = uniform_component_variance(5);
  CHECK(var == doctest::Approx(4.0 / 150).epsilon(1e-14));
  for (Index j = 0; j < 5; ++j) {
    const double mean = X.col(j).mean();
    CHECK(std::abs(mean - 0.2) <= 3.0 * std::sqrt(var / n));
    const Eigen::ArrayXd c = X.col(j).array() - mean;
    const double v = c.square().sum() / (n - 1);
    // standard error of the sample variance from the fourth central moment
    const double m4 = c.pow(4).mean();
    CHECK(std::abs(v - var) <= 3.0 * std::sqrt((m4 - v * v) / n));
  }
}

TEST_CASE("uniform sampler is reproducible") {
  Rng a(9), b(9);
  CHECK(sample_uniform_simplex(4, 100, a) == sample_uniform_simplex(4, 100, b));
}

TEST_CASE("mixture sampler") {
  const MixtureSpec ref = MixtureSpec::highdim_reference();
  CHECK_NOTHROW(ref.validate());
  Rng rng(11);
  const Eigen::MatrixXd X = sample_mixture(ref, 1000, rng);
  CHECK(X.rows() == 1000);
  CHECK(X.cols() == 20);
  CHECK(rows_on_simplex(X, 1e-9));
  CHECK(X.col(18).maxCoeff() <= 0.05);
  CHECK(X.col(19).maxCoeff() <= 0.05);

  // one center, no spread: every sample is the renormalized center
  MixtureSpec point;
  point.dimension = 3;
  point.centers_percent = {vec({20, 30, 60})};
  point.sigmas = {0.0};
  point.proportions = {1.0};
  point.uniform_remainder = 0.0;
  const Eigen::MatrixXd P = sample_mixture(point, 50, rng);
  const Eigen::VectorXd expect = point.normalized_centers().front();
  for (Index i = 0; i < P.rows(); ++i)
    CHECK((P.row(i).transpose() - expect).cwiseAbs().maxCoeff() < 1e-15);

  MixtureSpec bad = point;
  bad.proportions = {0.5};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("corner mass closed form") {
  CHECK(corner_mass(2, 0.5) == doctest::Approx(1.0));
  CHECK(corner_mass(3, 0.1) == doctest::Approx(0.03).epsilon(1e-12));
  Rng rng(5);
  const McEstimate mc = mc_corner_mass(10, 0.3, 10000000, rng);
  CHECK(mc.agrees(3.0));
}

TEST_CASE("tail above scaled mean") {
  CHECK(tail_above_scaled_mean(2, 1.0) == doctest::Approx(0.5));
  CHECK(std::abs(tail_above_scaled_mean(1000, 2.0) - std::exp(-2.0)) < 1e-4);
  Rng rng(6);
  const McEstimate mc = mc_tail_above_scaled_mean(10, 3.0, 10000000, rng);
  CHECK(mc.agrees(3.0));
}

TEST_CASE("band bound") {
  CHECK(band_bound(3, 1.0) <= 1.0);
  Rng rng(7);
  const McEstimate wide = mc_band_tail(3, 1.0, 100000, rng);
  CHECK(wide.hits == 0);

  const double b = band_bound(20, 0.1);
  CHECK(b == doctest::Approx(0.25 * 19.0 / 21.0).epsilon(1e-12));
  const McEstimate tail = mc_band_tail(20, 0.1, 1000000, rng);
  CHECK(tail.estimate <= b);

  CHECK(std::abs(band_bound(10000, 2.0 / 10000) - 0.25) < 1e-3);
}

TEST_CASE("first component above threshold is rare in high dimension") {
  Rng rng(8);
  const McEstimate mc = mc_first_component_above(15, 0.99, 1000000, rng);
  CHECK(mc.hits == 0);
  CHECK(mc.agrees(3.0));
}

TEST_CASE("concentration query validation") {
  ConcentrationQuery q;
  q.M = 1;
  CHECK_THROWS_AS(q.validate(), ValidationError);
  CHECK_THROWS_AS(corner_mass(3, 1.5), ValidationError);
}
