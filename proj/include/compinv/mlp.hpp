#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compinv/dataset.hpp"
#include "compinv/random.hpp"
#include "compinv/simplex.hpp"

namespace compinv::mlp {

enum class Mode { Train, Eval };

/// One stage of a feedforward stack. Activations are stored feature-major: each column
/// is one sample.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string type() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Caches whatever backward() needs. Train-mode batch-norm uses batch statistics but does
  /// not touch the running averages; see Network::commit_batch_statistics().
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) = 0;
  /// Eval-mode output without touching any cache.
  virtual Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const = 0;
  /// Stores parameter gradients and returns d loss / d input.
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) = 0;

  virtual std::vector<Eigen::MatrixXd*> parameters() { return {}; }
  virtual std::vector<Eigen::MatrixXd*> gradients() { return {}; }
  virtual std::vector<std::string> parameter_names() const { return {}; }
};

class Dense final : public Layer {
 public:
  Dense(Index in, Index out, bool use_bias = true);

  std::string type() const override { return "dense"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  /// Parameter gradients only; for the first layer, whose input gradient is unused.
  void accumulate(const Eigen::MatrixXd& grad_out);
  std::vector<Eigen::MatrixXd*> parameters() override;
  std::vector<Eigen::MatrixXd*> gradients() override;
  std::vector<std::string> parameter_names() const override;

  /// Glorot-uniform weights in +-sqrt(6 / (in + out)); zero bias.
  void initialize(Rng& rng);

  bool use_bias() const noexcept { return use_bias_; }
  Eigen::MatrixXd& weights() noexcept { return W_; }
  const Eigen::MatrixXd& weights() const noexcept { return W_; }
  Eigen::MatrixXd& bias() noexcept { return b_; }
  const Eigen::MatrixXd& bias() const noexcept { return b_; }

 private:
  Eigen::MatrixXd W_, b_, dW_, db_, input_;
  bool use_bias_;
};

class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(Index dim, double momentum = 0.99, double epsilon = 1e-5);

  std::string type() const override { return "batchnorm"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;
  std::vector<Eigen::MatrixXd*> parameters() override;
  std::vector<Eigen::MatrixXd*> gradients() override;
  std::vector<std::string> parameter_names() const override;

  /// running = momentum * running + (1 - momentum) * last train batch (unbiased variance).
  void commit_batch_statistics();

  double momentum() const noexcept { return momentum_; }
  double epsilon() const noexcept { return epsilon_; }
  Eigen::MatrixXd& scale() noexcept { return gamma_; }
  Eigen::MatrixXd& shift() noexcept { return beta_; }
  Eigen::VectorXd& running_mean() noexcept { return running_mean_; }
  Eigen::VectorXd& running_variance() noexcept { return running_var_; }
  const Eigen::VectorXd& running_mean() const noexcept { return running_mean_; }
  const Eigen::VectorXd& running_variance() const noexcept { return running_var_; }

 private:
  Eigen::MatrixXd gamma_, beta_, dgamma_, dbeta_;
  Eigen::VectorXd running_mean_, running_var_;
  Eigen::VectorXd batch_mean_, batch_var_, inv_std_;
  Eigen::MatrixXd normalized_;
  Index batch_size_ = 0;
  bool has_batch_ = false;
  double momentum_, epsilon_;
};

class Sigmoid final : public Layer {
 public:
  std::string type() const override { return "sigmoid"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

 private:
  Eigen::MatrixXd output_;
};

class Relu final : public Layer {
 public:
  std::string type() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

 private:
  Eigen::MatrixXd input_;
};

/// Divides each (nonnegative) column by its sum; an all-zero column becomes uniform.
class SimplexScale final : public Layer {
 public:
  std::string type() const override { return "simplex-scale"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SimplexScale>(*this); }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Mode mode) override;
  Eigen::MatrixXd infer(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd backward(const Eigen::MatrixXd& grad_out) override;

 private:
  Eigen::MatrixXd output_;
  Eigen::RowVectorXd sums_;
};

// ---------------------------------------------------------------------------

/// Architecture of an inverse network: [dense -> (batch-norm) -> sigmoid] per hidden
/// width, then dense -> ReLU -> simplex-scale.
struct NetworkSpec {
  Index input_dim = 0;
  std::vector<Index> hidden_widths;
  Index output_dim = 0;
  bool use_batchnorm = true;

  /// Two hidden layers of multiplier * M_v nodes.
  static NetworkSpec standard(Index L, Index M_v, Index multiplier = 4);
  void validate() const;
};

/// Value-semantic layer stack.
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::size_t depth() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  /// rows: b x input_dim samples; returns b x output_dim.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& rows, Mode mode);
  /// Predictions in eval mode.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& rows) const;
  /// Back-propagates d loss / d output (b x output_dim) from the last forward().
  void backward(const Eigen::MatrixXd& grad_rows);
  void commit_batch_statistics();

  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<Eigen::MatrixXd*> gradients();
  Index parameter_count() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Builds and initializes the layer stack described by `spec`; deterministic in the rng state.
Network build_network(const NetworkSpec& spec, Rng& rng);

/// Redraws (Glorot-uniform) each output-layer row whose ReLU is inactive on every one of
/// `inputs`. Such a unit is stuck at zero with zero gradient and the sigmoid features,
/// all positive, make this common at initialization. Returns the number of redraws.
int redraw_inactive_outputs(Network& network, const Eigen::MatrixXd& inputs, Rng& rng,
                            int max_attempts = 1000);

/// Mean over batch and components of the squared difference.
double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);
/// d loss_mse / d pred.
Eigen::MatrixXd loss_mse_gradient(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

// ---------------------------------------------------------------------------

enum class DecaySchedule { PerStep, PerEpoch };

/// Adam with inverse-time learning-rate decay lr_t = lr / (1 + decay * t), where t counts
/// updates (PerStep) or completed epochs (PerEpoch).
class Adam {
 public:
  Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double decay = 0.01,
       DecaySchedule schedule = DecaySchedule::PerStep, double epsilon = 1e-7);

  void step(const std::vector<Eigen::MatrixXd*>& params,
            const std::vector<Eigen::MatrixXd*>& grads);
  /// Advances the decay clock under the PerEpoch schedule; no-op otherwise.
  void end_epoch();
  /// Decayed rate used by the next step, before bias correction.
  double current_learning_rate() const;
  long iterations() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, decay_, epsilon_;
  DecaySchedule schedule_;
  long t_ = 0;
  long epochs_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  Index batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double decay = 0.01;
  DecaySchedule decay_schedule = DecaySchedule::PerStep;
  int max_epochs = 100;
  double validation_fraction = 0.1;
  /// Replace the training pool every this many epochs; 0 disables.
  int regenerate_every = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Inputs (observations) and targets (visible compositions) for inverse learning.
struct TrainingSet {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
};

/// Observations paired with the normalized visible part of the compositions.
TrainingSet make_training_set(const PairedDataset& data, const std::vector<Index>& visible);

/// Produces a fresh training pool for regeneration block `block` (1, 2, ...).
using Regenerator = std::function<TrainingSet(int block)>;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainedModel {
  /// Snapshot with the lowest validation loss (the initial network counts as epoch 0).
  Network network;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Mini-batch Adam on the MSE between network output and target compositions, holding
/// out a validation split and keeping the best validation snapshot. Throws NumericalError
/// with the epoch and step if the loss becomes non-finite.
TrainedModel train(Network network, const TrainingSet& data, const TrainingConfig& config,
                   const Regenerator& regenerator = {});

/// Columns: epoch, train_loss, val_loss, lr.
void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct TensorDeviation {
  std::size_t layer = 0;
  std::string layer_type;
  std::string parameter;
  double max_relative_deviation = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  double max_relative_deviation = 0.0;
  std::vector<TensorDeviation> tensors;
};

/// Compares back-propagated parameter gradients of loss_mse against central differences
/// in train mode. Relative deviation is |a - n| / max(|a|, |n|, 1e-7).
GradCheckReport grad_check(Network& network, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, double eps = 1e-5);

// ---------------------------------------------------------------------------

struct ShallowFitOptions {
  int max_iterations = 20000;
  double tolerance = 1e-15;
};

/// Fits a single bias-free dense layer mapping compositions to observations by full-batch
/// gradient descent on the MSE (step 1 / Lipschitz constant). Returns the L x M weights.
Eigen::MatrixXd train_shallow_forward(const Eigen::MatrixXd& compositions,
                                      const Eigen::MatrixXd& observations,
                                      const ShallowFitOptions& options = {});

/// W' = W - b 1^T / K. For inputs with 1^T x = K, W' x + b equals W x.
Eigen::MatrixXd equivalent_biased_weights(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                          double K = 1.0);

// ---------------------------------------------------------------------------

void save_checkpoint(const Network& network, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace compinv::mlp
