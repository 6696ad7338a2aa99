#include "doctest.h"

#include "compinv/dataset.hpp"
#include "compinv/knn.hpp"
#include "compinv/systems.hpp"

using namespace compinv;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd out(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (const auto& row : r) {
    Index j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

}  // namespace

TEST_CASE("single-sample index") {
  const KnnIndex idx(rows({{1.0, 2.0}}), rows({{0.3, 0.7}}));
  const Eigen::VectorXd p = idx.predict(Eigen::Vector2d(-4, 9), 1);
  CHECK(p(0) == 0.3);
  CHECK(p(1) == 0.7);
  CHECK_THROWS_AS(idx.predict(Eigen::Vector2d(0, 0), 2), ValidationError);
  CHECK_THROWS_AS(idx.predict(Eigen::Vector2d(0, 0), 0), ValidationError);
}

TEST_CASE("exact hit returns the training label") {
  const KnnIndex idx(rows({{0, 0}, {1, 0}, {0, 1}}), rows({{1, 0}, {0.5, 0.5}, {0, 1}}));
  const Eigen::VectorXd p = idx.predict(Eigen::Vector2d(1, 0), 1);
  CHECK(p(0) == 0.5);
  CHECK(p(1) == 0.5);
  // also when more neighbors are requested
  const Eigen::VectorXd q = idx.predict(Eigen::Vector2d(1, 0), 3);
  CHECK(q(0) == 0.5);
}

TEST_CASE("equidistant neighbors average") {
  const KnnIndex idx(rows({{1, 0}, {-1, 0}, {5, 5}}), rows({{1, 0}, {0, 1}, {0.5, 0.5}}));
  const Eigen::VectorXd p = idx.predict(Eigen::Vector2d(0, 0), 2);
  CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("nearest is sorted and weights favour the closer sample") {
  const KnnIndex idx(rows({{0}, {1}, {3}}), rows({{1, 0}, {0, 1}, {0.5, 0.5}}));
  const auto nb = idx.nearest(Eigen::VectorXd::Constant(1, 0.25), 3);
  REQUIRE(nb.size() == 3);
  CHECK(nb[0].index == 0);
  CHECK(nb[1].index == 1);
  CHECK(nb[2].index == 2);
  CHECK(nb[0].distance == doctest::Approx(0.0625));
  const Eigen::VectorXd p = idx.predict(Eigen::VectorXd::Constant(1, 0.25), 2);
  // inverse squared distance: 16 and 16/9
  CHECK(p(0) == doctest::Approx(16.0 / (16.0 + 16.0 / 9.0)));
  CHECK(is_on_simplex(p, 1e-12));
}

TEST_CASE("labels must lie on the simplex") {
  CHECK_THROWS_AS(KnnIndex(rows({{0}}), rows({{0.4, 0.4}})), ValidationError);
  CHECK_THROWS_AS(KnnIndex(rows({{0}, {1}}), rows({{1, 0}})), ValidationError);
}

TEST_CASE("fit and sweep are deterministic") {
  Rng rng(1);
  const ForwardSystem sys = ForwardSystem::linear(build_gaussian_matrix(7, 5, rng));
  const PairedDataset train = generate_dataset(sys, Sampler::uniform(5), 2000, 0.005, 2);
  const PairedDataset test = generate_dataset(sys, Sampler::uniform(5), 200, 0.005, 3);
  const std::vector<Index> vis{0, 1, 2, 3, 4};
  const KnnIndex a = KnnIndex::fit(train, vis);
  const KnnIndex b = KnnIndex::fit(train, vis);
  CHECK(a.predict_rows(test.Y, 5) == b.predict_rows(test.Y, 5));
  CHECK(a.predict_rows(test.Y, 5, 1) == a.predict_rows(test.Y, 5, 3));
  CHECK(rows_on_simplex(a.predict_rows(test.Y, 7), 1e-9));

  const auto c1 = sweep_k(a, test.Y, test.X, {1, 3, 5});
  const auto c2 = sweep_k(a, test.Y, test.X, {1, 3, 5});
  REQUIRE(c1.size() == 3);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].k == c2[i].k);
    CHECK(c1[i].e_percent == c2[i].e_percent);
  }
}

TEST_CASE("high-dimensional index capacity") {
  const ForwardSystem sys = ForwardSystem::highdim_linear(build_rbf_matrix());
  const PairedDataset train = generate_dataset(sys, Sampler::uniform(20), 10000, 0.005, 4);
  std::vector<Index> vis(20);
  for (Index i = 0; i < 20; ++i) vis[static_cast<std::size_t>(i)] = i;
  const KnnIndex idx = KnnIndex::fit(train, vis);
  CHECK(idx.size() == 10000);
  CHECK(idx.observation_dim() == 1000);
  CHECK(is_on_simplex(idx.predict(train.Y.row(17).transpose(), 11), 1e-9));
}
