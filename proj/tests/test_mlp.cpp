#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "compinv/dataset.hpp"
#include "compinv/mlp.hpp"
#include "compinv/systems.hpp"

using namespace compinv;
using namespace compinv::mlp;

namespace {

Eigen::MatrixXd gaussian(Index r, Index c, Rng& rng) {
  Eigen::MatrixXd out(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) out(i, j) = rng.normal();
  return out;
}

NetworkSpec small_spec() {
  NetworkSpec s;
  s.input_dim = 5;
  s.hidden_widths = {8, 8};
  s.output_dim = 3;
  return s;
}

}  // namespace

TEST_CASE("parameter count") {
  NetworkSpec s;
  s.input_dim = 5;
  s.hidden_widths = {12, 12};
  s.output_dim = 3;
  Rng rng(1);
  const Network net = build_network(s, rng);
  CHECK(net.parameter_count() == 5 * 12 + 12 + 12 * 12 + 12 + 12 * 3 + 3 + 2 * (12 + 12));
  CHECK(net.parameter_count() == 315);

  s.use_batchnorm = false;
  CHECK(build_network(s, rng).parameter_count() == 315 - 48);

  const NetworkSpec standard = NetworkSpec::standard(1000, 18, 32);
  CHECK(standard.hidden_widths == std::vector<Index>{576, 576});
}

TEST_CASE("spec validation") {
  NetworkSpec s = small_spec();
  s.output_dim = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = small_spec();
  s.hidden_widths = {8, 0};
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("same seed gives the same initial network") {
  Rng a(7), b(7);
  Network n1 = build_network(small_spec(), a);
  Network n2 = build_network(small_spec(), b);
  const auto p1 = n1.parameters();
  const auto p2 = n2.parameters();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(*p1[i] == *p2[i]);
}

TEST_CASE("forward outputs lie on the simplex") {
  Rng rng(2);
  Network net = build_network(small_spec(), rng);
  const Eigen::MatrixXd x = 3.0 * gaussian(64, 5, rng);
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    const Eigen::MatrixXd y = net.forward(x, mode);
    CHECK(y.allFinite());
    CHECK(rows_on_simplex(y, 1e-12));
  }
  CHECK(rows_on_simplex(net.predict(x), 1e-12));
}

TEST_CASE("eval forward has no batch coupling") {
  Rng rng(3);
  Network net = build_network(small_spec(), rng);
  // give the running statistics something other than their initial values
  for (int i = 0; i < 5; ++i) {
    net.forward(gaussian(32, 5, rng), Mode::Train);
    net.commit_batch_statistics();
  }
  const Eigen::MatrixXd x = gaussian(20, 5, rng);
  const Eigen::MatrixXd batched = net.forward(x, Mode::Eval);
  CHECK((net.predict(x) - batched).cwiseAbs().maxCoeff() < 1e-12);
  for (Index i = 0; i < x.rows(); ++i)
    CHECK((net.predict(x.row(i)) - batched.row(i)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simplex scale falls back to the centroid") {
  SimplexScale s;
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 3);
  const Eigen::MatrixXd y = s.forward(zeros, Mode::Train);
  CHECK((y.array() - 0.25).abs().maxCoeff() < 1e-15);
  // gradient through the fallback is zero
  CHECK(s.backward(Eigen::MatrixXd::Ones(4, 3)).isZero());
}

TEST_CASE("loss_mse") {
  Rng rng(4);
  const Eigen::MatrixXd a = gaussian(6, 3, rng);
  CHECK(loss_mse(a, a) == 0.0);
  CHECK(loss_mse(a, a.array() + 0.1) == doctest::Approx(0.01).epsilon(1e-12));

  const Eigen::MatrixXd b = gaussian(6, 3, rng);
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) acc += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  CHECK(std::abs(loss_mse(a, b) - acc / 18.0) < 1e-14);
  CHECK_THROWS_AS(loss_mse(a, b.leftCols(2)), ValidationError);
}

TEST_CASE("gradient check on the standard layer stack") {
  Rng rng(5);
  Network net = build_network(small_spec(), rng);
  const Eigen::MatrixXd x = gaussian(8, 5, rng);
  const Eigen::MatrixXd t = sample_uniform_simplex(3, 8, rng);
  const GradCheckReport r = grad_check(net, x, t, 1e-5);
  CHECK(r.max_relative_deviation < 1e-4);
  bool dense = false, bn = false;
  for (const auto& d : r.tensors) {
    dense = dense || d.layer_type == "dense";
    bn = bn || d.layer_type == "batchnorm";
  }
  CHECK(dense);
  CHECK(bn);
}

TEST_CASE("gradient check error shrinks with the step on a sigmoid net") {
  Rng rng(6);
  Network net;
  auto d1 = std::make_unique<Dense>(4, 6);
  d1->initialize(rng);
  auto d2 = std::make_unique<Dense>(6, 3);
  d2->initialize(rng);
  net.add(std::move(d1));
  net.add(std::make_unique<Sigmoid>());
  net.add(std::move(d2));
  net.add(std::make_unique<Sigmoid>());
  net.add(std::make_unique<SimplexScale>());
  const Eigen::MatrixXd x = gaussian(5, 4, rng);
  const Eigen::MatrixXd t = sample_uniform_simplex(3, 5, rng);
  const double coarse = grad_check(net, x, t, 1e-3).max_relative_deviation;
  const double fine = grad_check(net, x, t, 1e-4).max_relative_deviation;
  // second-order truncation: a 10x smaller step cuts the error by about 100
  CHECK(fine < coarse / 30.0);
  CHECK(grad_check(net, x, t, 1e-5).max_relative_deviation < 1e-6);
}

TEST_CASE("zero output weights") {
  Rng rng(7);
  Network net = build_network(small_spec(), rng);
  auto& out = dynamic_cast<Dense&>(net.layer(net.depth() - 3));
  out.weights().setZero();
  out.bias().setConstant(0.5);
  const Eigen::MatrixXd x = gaussian(8, 5, rng);
  const Eigen::MatrixXd t = sample_uniform_simplex(3, 8, rng);
  const GradCheckReport r = grad_check(net, x, t, 1e-5);
  CHECK(r.max_relative_deviation < 1e-4);
  // nothing reaches the layers below the zeroed weights
  for (const auto& d : r.tensors)
    if (d.layer < net.depth() - 3) CHECK(d.max_abs_analytic == 0.0);
}

TEST_CASE("adam schedule") {
  Adam per_step(1e-3, 0.9, 0.999, 0.01, DecaySchedule::PerStep);
  Adam per_epoch(1e-3, 0.9, 0.999, 0.01, DecaySchedule::PerEpoch);
  Eigen::MatrixXd p = Eigen::MatrixXd::Ones(2, 2), g = Eigen::MatrixXd::Ones(2, 2);
  Eigen::MatrixXd q = p;
  for (int i = 0; i < 10; ++i) {
    per_step.step({&p}, {&g});
    per_epoch.step({&q}, {&g});
  }
  per_epoch.end_epoch();
  CHECK(per_step.iterations() == 10);
  CHECK(per_step.current_learning_rate() < per_epoch.current_learning_rate());
  // first step moves every coordinate by about lr
  Adam fresh(1e-3, 0.9, 0.999, 0.0);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(1, 1), gr = Eigen::MatrixXd::Constant(1, 1, 5.0);
  fresh.step({&r}, {&gr});
  CHECK(r(0, 0) == doctest::Approx(-1e-3).epsilon(1e-4));
}

TEST_CASE("training") {
  Rng rng(8);
  const ForwardSystem sys = ForwardSystem::linear(build_gaussian_matrix(5, 3, rng));
  const PairedDataset data = generate_dataset(sys, Sampler::uniform(3), 2000, 0.005, 9);
  const TrainingSet set = make_training_set(data, {0, 1, 2});
  const Network init = build_network(small_spec(), rng);

  SUBCASE("zero epochs return the initial snapshot") {
    TrainingConfig cfg;
    cfg.max_epochs = 0;
    cfg.seed = 1;
    TrainedModel m = train(init, set, cfg);
    Network copy = init;
    const auto a = m.network.parameters();
    const auto b = copy.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
    CHECK(m.best_epoch == 0);
    REQUIRE(m.history.size() == 1);
  }

  SUBCASE("loss decreases and training is reproducible") {
    TrainingConfig cfg;
    cfg.max_epochs = 20;
    cfg.batch_size = 128;
    cfg.decay_schedule = DecaySchedule::PerEpoch;
    cfg.seed = 3;
    const TrainedModel a = train(init, set, cfg);
    const TrainedModel b = train(init, set, cfg);
    REQUIRE(a.history.size() == 21);
    CHECK(a.best_val_loss < a.history.front().val_loss);
    CHECK(a.best_val_loss == b.best_val_loss);
    CHECK(a.best_epoch == b.best_epoch);
  }

  SUBCASE("regeneration is called on schedule") {
    TrainingConfig cfg;
    cfg.max_epochs = 7;
    cfg.regenerate_every = 3;
    cfg.batch_size = 256;
    cfg.seed = 4;
    std::vector<int> blocks;
    const Regenerator regen = [&](int block) {
      blocks.push_back(block);
      return make_training_set(generate_dataset(sys, Sampler::uniform(3), 2000, 0.005, 100 + block),
                               {0, 1, 2});
    };
    train(init, set, cfg, regen);
    CHECK(blocks == std::vector<int>{1, 2});
  }

  SUBCASE("configuration ranges") {
    TrainingConfig cfg;
    cfg.learning_rate = 1e-2;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }
}

TEST_CASE("shallow forward network") {
  Rng rng(10);
  const Eigen::MatrixXd H = build_gaussian_matrix(5, 3, rng);
  const Eigen::MatrixXd X = sample_uniform_simplex(3, 500, rng);
  const Eigen::MatrixXd W = train_shallow_forward(X, X * H.transpose());
  CHECK((W - H).norm() / H.norm() < 1e-3);

  const Eigen::MatrixXd one = sample_uniform_simplex(3, 1, rng);
  const Eigen::MatrixXd y1 = one * H.transpose();
  const Eigen::MatrixXd W1 = train_shallow_forward(one, y1);
  CHECK((one * W1.transpose() - y1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bias can be folded into the weights on the simplex") {
  Rng rng(11);
  const Eigen::MatrixXd W = gaussian(5, 3, rng);
  const Eigen::VectorXd b = gaussian(5, 1, rng);
  const Eigen::MatrixXd W2 = equivalent_biased_weights(W, b);
  const Eigen::MatrixXd X = sample_uniform_simplex(3, 1000, rng);
  double worst = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd m = X.row(i).transpose();
    worst = std::max(worst, (W * m - (W2 * m + b)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(equivalent_biased_weights(W, b.head(2)), ValidationError);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(12);
  Network net = build_network(small_spec(), rng);
  net.forward(gaussian(16, 5, rng), Mode::Train);
  net.commit_batch_statistics();
  const auto path = std::filesystem::temp_directory_path() / "compinv_test_net.json";
  save_checkpoint(net, path);
  const Network back = load_checkpoint(path);
  const Eigen::MatrixXd x = gaussian(10, 5, rng);
  CHECK(back.predict(x) == net.predict(x));
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
