#include "compinv/mlp.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "compinv/errors.hpp"
#include "compinv/metrics.hpp"

namespace compinv::mlp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(Index in, Index out, bool use_bias)
    : W_(MatrixXd::Zero(out, in)),
      b_(MatrixXd::Zero(use_bias ? out : 0, 1)),
      dW_(MatrixXd::Zero(out, in)),
      db_(MatrixXd::Zero(use_bias ? out : 0, 1)),
      use_bias_(use_bias) {
  if (in < 1 || out < 1) throw ValidationError("dense layer dimensions must be >= 1");
}

void Dense::initialize(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(W_.rows() + W_.cols()));
  for (Index i = 0; i < W_.rows(); ++i)
    for (Index j = 0; j < W_.cols(); ++j) W_(i, j) = rng.uniform(-limit, limit);
  b_.setZero();
}

MatrixXd Dense::infer(const MatrixXd& x) const {
  MatrixXd out = W_ * x;
  if (use_bias_) out.colwise() += b_.col(0);
  return out;
}

MatrixXd Dense::forward(const MatrixXd& x, Mode) {
  input_ = x;
  return infer(x);
}

void Dense::accumulate(const MatrixXd& grad_out) {
  dW_.noalias() = grad_out * input_.transpose();
  if (use_bias_) db_ = grad_out.rowwise().sum();
}

MatrixXd Dense::backward(const MatrixXd& grad_out) {
  accumulate(grad_out);
  return W_.transpose() * grad_out;
}

std::vector<MatrixXd*> Dense::parameters() {
  if (use_bias_) return {&W_, &b_};
  return {&W_};
}

std::vector<MatrixXd*> Dense::gradients() {
  if (use_bias_) return {&dW_, &db_};
  return {&dW_};
}

std::vector<std::string> Dense::parameter_names() const {
  if (use_bias_) return {"W", "b"};
  return {"W"};
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(Index dim, double momentum, double epsilon)
    : gamma_(MatrixXd::Ones(dim, 1)),
      beta_(MatrixXd::Zero(dim, 1)),
      dgamma_(MatrixXd::Zero(dim, 1)),
      dbeta_(MatrixXd::Zero(dim, 1)),
      running_mean_(VectorXd::Zero(dim)),
      running_var_(VectorXd::Ones(dim)),
      momentum_(momentum),
      epsilon_(epsilon) {
  if (dim < 1) throw ValidationError("batch-norm dimension must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("batch-norm momentum outside [0,1)");
  if (!(epsilon > 0.0)) throw ValidationError("batch-norm epsilon must be positive");
}

MatrixXd BatchNorm::infer(const MatrixXd& x) const {
  const VectorXd inv = (running_var_.array() + epsilon_).rsqrt();
  const VectorXd scale = gamma_.col(0).cwiseProduct(inv);
  const VectorXd shift = beta_.col(0) - running_mean_.cwiseProduct(scale);
  return (x.array().colwise() * scale.array()).colwise() + shift.array();
}

MatrixXd BatchNorm::forward(const MatrixXd& x, Mode mode) {
  if (mode == Mode::Eval) return infer(x);
  batch_size_ = x.cols();
  if (batch_size_ < 2) throw ValidationError("batch-norm in train mode needs at least 2 samples");
  const double b = static_cast<double>(batch_size_);
  batch_mean_ = x.rowwise().sum() / b;
  const MatrixXd centered = x.colwise() - batch_mean_;
  batch_var_ = centered.array().square().rowwise().sum() / b;
  inv_std_ = (batch_var_.array() + epsilon_).rsqrt();
  normalized_ = centered.array().colwise() * inv_std_.array();
  has_batch_ = true;
  return (normalized_.array().colwise() * gamma_.col(0).array()).colwise() + beta_.col(0).array();
}

MatrixXd BatchNorm::backward(const MatrixXd& grad_out) {
  const double b = static_cast<double>(batch_size_);
  dbeta_ = grad_out.rowwise().sum();
  dgamma_ = (grad_out.array() * normalized_.array()).rowwise().sum();
  const MatrixXd dxhat = grad_out.array().colwise() * gamma_.col(0).array();
  const VectorXd sum_dxhat = dxhat.rowwise().sum();
  const VectorXd sum_dxhat_xhat = (dxhat.array() * normalized_.array()).rowwise().sum();
  MatrixXd dx = (b * dxhat.array()).colwise() - sum_dxhat.array();
  dx.array() -= normalized_.array().colwise() * sum_dxhat_xhat.array();
  dx.array().colwise() *= inv_std_.array() / b;
  return dx;
}

void BatchNorm::commit_batch_statistics() {
  if (!has_batch_) return;
  const double b = static_cast<double>(batch_size_);
  running_mean_ = momentum_ * running_mean_ + (1.0 - momentum_) * batch_mean_;
  running_var_ = momentum_ * running_var_ + (1.0 - momentum_) * batch_var_ * (b / (b - 1.0));
  has_batch_ = false;
}

std::vector<MatrixXd*> BatchNorm::parameters() { return {&gamma_, &beta_}; }
std::vector<MatrixXd*> BatchNorm::gradients() { return {&dgamma_, &dbeta_}; }
std::vector<std::string> BatchNorm::parameter_names() const { return {"gamma", "beta"}; }

// ---------------------------------------------------------------------------
// Activations

MatrixXd Sigmoid::infer(const MatrixXd& x) const {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

MatrixXd Sigmoid::forward(const MatrixXd& x, Mode) {
  output_ = infer(x);
  return output_;
}

MatrixXd Sigmoid::backward(const MatrixXd& grad_out) {
  return (grad_out.array() * output_.array() * (1.0 - output_.array())).matrix();
}

MatrixXd Relu::infer(const MatrixXd& x) const { return x.cwiseMax(0.0); }

MatrixXd Relu::forward(const MatrixXd& x, Mode) {
  input_ = x;
  return infer(x);
}

MatrixXd Relu::backward(const MatrixXd& grad_out) {
  return (input_.array() > 0.0).select(grad_out, 0.0);
}

MatrixXd SimplexScale::infer(const MatrixXd& x) const {
  MatrixXd out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double s = x.col(j).sum();
    if (s > 0.0)
      out.col(j) = x.col(j) / s;
    else
      out.col(j).setConstant(1.0 / static_cast<double>(x.rows()));
  }
  return out;
}

MatrixXd SimplexScale::forward(const MatrixXd& x, Mode) {
  output_ = infer(x);
  sums_ = x.colwise().sum();
  return output_;
}

MatrixXd SimplexScale::backward(const MatrixXd& grad_out) {
  MatrixXd dx(grad_out.rows(), grad_out.cols());
  for (Index j = 0; j < grad_out.cols(); ++j) {
    const double s = sums_(j);
    if (s > 0.0) {
      const double proj = grad_out.col(j).dot(output_.col(j));
      dx.col(j) = (grad_out.col(j).array() - proj).matrix() / s;
    } else {
      // the uniform fallback is locally constant
      dx.col(j).setZero();
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Network

NetworkSpec NetworkSpec::standard(Index L, Index M_v, Index multiplier) {
  NetworkSpec spec;
  spec.input_dim = L;
  spec.hidden_widths = {multiplier * M_v, multiplier * M_v};
  spec.output_dim = M_v;
  return spec;
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw ValidationError("network input_dim must be >= 1");
  if (output_dim < 1) throw ValidationError("network output_dim must be >= 1");
  for (Index w : hidden_widths)
    if (w < 1) throw ValidationError("network hidden widths must be >= 1");
}

Network::Network(const Network& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

MatrixXd Network::forward(const MatrixXd& rows, Mode mode) {
  if (rows.rows() == 0) throw ValidationError("forward on an empty batch");
  MatrixXd a = rows.transpose();
  for (auto& l : layers_) a = l->forward(a, mode);
  return a.transpose();
}

MatrixXd Network::predict(const MatrixXd& rows) const {
  if (rows.rows() == 0) throw ValidationError("predict on an empty batch");
  MatrixXd a = rows.transpose();
  for (const auto& l : layers_) a = l->infer(a);
  return a.transpose();
}

void Network::backward(const MatrixXd& grad_rows) {
  MatrixXd g = grad_rows.transpose();
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i == 0) {
      if (auto* dense = dynamic_cast<Dense*>(layers_[0].get())) {
        dense->accumulate(g);
        return;
      }
    }
    g = layers_[i]->backward(g);
  }
}

void Network::commit_batch_statistics() {
  for (auto& l : layers_)
    if (auto* bn = dynamic_cast<BatchNorm*>(l.get())) bn->commit_batch_statistics();
}

std::vector<MatrixXd*> Network::parameters() {
  std::vector<MatrixXd*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<MatrixXd*> Network::gradients() {
  std::vector<MatrixXd*> out;
  for (auto& l : layers_)
    for (auto* g : l->gradients()) out.push_back(g);
  return out;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers_)
    for (auto* p : const_cast<Layer&>(*l).parameters()) n += p->size();
  return n;
}

Network build_network(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  Network net;
  Index in = spec.input_dim;
  for (Index width : spec.hidden_widths) {
    auto dense = std::make_unique<Dense>(in, width);
    dense->initialize(rng);
    net.add(std::move(dense));
    if (spec.use_batchnorm) net.add(std::make_unique<BatchNorm>(width));
    net.add(std::make_unique<Sigmoid>());
    in = width;
  }
  auto out = std::make_unique<Dense>(in, spec.output_dim);
  out->initialize(rng);
  net.add(std::move(out));
  net.add(std::make_unique<Relu>());
  net.add(std::make_unique<SimplexScale>());
  return net;
}

int redraw_inactive_outputs(Network& network, const MatrixXd& inputs, Rng& rng, int max_attempts) {
  std::size_t last = network.depth();
  for (std::size_t i = network.depth(); i-- > 0;) {
    if (dynamic_cast<Dense*>(&network.layer(i))) {
      last = i;
      break;
    }
  }
  if (last == network.depth() || inputs.rows() == 0) return 0;
  auto& out = dynamic_cast<Dense&>(network.layer(last));
  MatrixXd h = inputs.transpose();
  for (std::size_t i = 0; i < last; ++i) h = network.layer(i).infer(h);

  const double limit = std::sqrt(6.0 / static_cast<double>(out.weights().rows() + out.weights().cols()));
  int redraws = 0;
  for (Index r = 0; r < out.weights().rows(); ++r) {
    const double bias = out.use_bias() ? out.bias()(r, 0) : 0.0;
    for (int attempt = 0; (out.weights().row(r) * h).maxCoeff() + bias <= 0.0; ++attempt) {
      if (attempt == max_attempts)
        throw NumericalError("redraw_inactive_outputs: output unit " + std::to_string(r) +
                             " stays inactive");
      for (Index c = 0; c < out.weights().cols(); ++c) out.weights()(r, c) = rng.uniform(-limit, limit);
      ++redraws;
    }
  }
  return redraws;
}

double loss_mse(const MatrixXd& pred, const MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ValidationError("loss_mse: shape mismatch");
  if (pred.size() == 0) throw ValidationError("loss_mse: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

MatrixXd loss_mse_gradient(const MatrixXd& pred, const MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ValidationError("loss_mse_gradient: shape mismatch");
  return 2.0 * (pred - target) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(double learning_rate, double beta1, double beta2, double decay,
           DecaySchedule schedule, double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      decay_(decay),
      epsilon_(epsilon),
      schedule_(schedule) {}

double Adam::current_learning_rate() const {
  const long clock = schedule_ == DecaySchedule::PerStep ? t_ : epochs_;
  return lr_ / (1.0 + decay_ * static_cast<double>(clock));
}

void Adam::end_epoch() { ++epochs_; }

void Adam::step(const std::vector<MatrixXd*>& params, const std::vector<MatrixXd*>& grads) {
  if (params.size() != grads.size()) throw ValidationError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  const double lr = current_learning_rate();
  ++t_;
  const double t = static_cast<double>(t_);
  const double lr_t = lr * std::sqrt(1.0 - std::pow(beta2_, t)) / (1.0 - std::pow(beta1_, t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& g = grads[k]->array();
    m_[k].array() = beta1_ * m_[k].array() + (1.0 - beta1_) * g;
    v_[k].array() = beta2_ * v_[k].array() + (1.0 - beta2_) * g.square();
    params[k]->array() -= lr_t * m_[k].array() / (v_[k].array().sqrt() + epsilon_);
  }
}

// ---------------------------------------------------------------------------
// Training

void TrainingConfig::validate() const {
  if (!(learning_rate >= 1e-6 && learning_rate <= 1e-3))
    throw ValidationError("learning_rate must lie in [1e-6, 1e-3]");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("adam betas must lie in [0, 1)");
  if (!(decay >= 0.0)) throw ValidationError("decay must be >= 0");
  if (max_epochs < 0) throw ValidationError("max_epochs must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
    throw ValidationError("validation_fraction must lie in (0, 0.5)");
  if (regenerate_every < 0) throw ValidationError("regenerate_every must be >= 0");
}

TrainingSet make_training_set(const PairedDataset& data, const std::vector<Index>& visible) {
  return {data.Y, normalized_truth_rows(data.X, visible)};
}

namespace {

MatrixXd gather_rows(const MatrixXd& A, const std::vector<Index>& idx, std::size_t begin,
                     std::size_t end) {
  MatrixXd out(static_cast<Index>(end - begin), A.cols());
  for (std::size_t r = begin; r < end; ++r) out.row(static_cast<Index>(r - begin)) = A.row(idx[r]);
  return out;
}

std::string divergence_message(int epoch, long step, double loss) {
  std::ostringstream os;
  os << "training diverged at epoch " << epoch << ", step " << step << " (loss " << loss << ")";
  return os.str();
}

}  // namespace

TrainedModel train(Network network, const TrainingSet& data, const TrainingConfig& config,
                   const Regenerator& regenerator) {
  config.validate();
  const Index n = data.inputs.rows();
  if (data.targets.rows() != n) throw ValidationError("train: inputs/targets row mismatch");
  Index n_val = static_cast<Index>(std::llround(config.validation_fraction * static_cast<double>(n)));
  n_val = std::max<Index>(n_val, 1);
  // a batch larger than the pool means full-batch steps
  if (n - n_val < 2) throw ValidationError("train: need at least two training rows");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng split_rng = Rng::substream(config.seed, "validation-split");
  split_rng.shuffle(std::span<Index>(order));
  const MatrixXd val_x = gather_rows(data.inputs, order, 0, static_cast<std::size_t>(n_val));
  const MatrixXd val_y = gather_rows(data.targets, order, 0, static_cast<std::size_t>(n_val));
  MatrixXd train_x = gather_rows(data.inputs, order, static_cast<std::size_t>(n_val), order.size());
  MatrixXd train_y = gather_rows(data.targets, order, static_cast<std::size_t>(n_val), order.size());

  Rng batch_rng = Rng::substream(config.seed, "batch-order");
  Adam adam(config.learning_rate, config.beta1, config.beta2, config.decay, config.decay_schedule);
  const auto params = network.parameters();
  const auto grads = network.gradients();

  TrainedModel result;
  result.best_val_loss = loss_mse(network.predict(val_x), val_y);
  if (!std::isfinite(result.best_val_loss))
    throw NumericalError(divergence_message(0, 0, result.best_val_loss));
  result.network = network;
  result.history.push_back({0, std::nan(""), result.best_val_loss, adam.current_learning_rate()});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.regenerate_every > 0 && epoch > 1 && (epoch - 1) % config.regenerate_every == 0 &&
        regenerator) {
      TrainingSet fresh = regenerator((epoch - 1) / config.regenerate_every);
      if (fresh.inputs.rows() < 2 || fresh.targets.rows() != fresh.inputs.rows() ||
          fresh.inputs.cols() != train_x.cols() || fresh.targets.cols() != train_y.cols())
        throw ValidationError("train: regenerated pool has the wrong shape");
      train_x = std::move(fresh.inputs);
      train_y = std::move(fresh.targets);
    }

    std::vector<Index> perm(static_cast<std::size_t>(train_x.rows()));
    std::iota(perm.begin(), perm.end(), Index{0});
    batch_rng.shuffle(std::span<Index>(perm));

    double loss_sum = 0.0;
    Index seen = 0;
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t begin = 0; begin < perm.size(); begin += bs) {
      const std::size_t end = std::min(perm.size(), begin + bs);
      if (end - begin < 2) break;  // batch statistics need two samples
      const MatrixXd xb = gather_rows(train_x, perm, begin, end);
      const MatrixXd yb = gather_rows(train_y, perm, begin, end);
      const MatrixXd pred = network.forward(xb, Mode::Train);
      const double loss = loss_mse(pred, yb);
      if (!std::isfinite(loss)) throw NumericalError(divergence_message(epoch, adam.iterations(), loss));
      network.backward(loss_mse_gradient(pred, yb));
      network.commit_batch_statistics();
      adam.step(params, grads);
      loss_sum += loss * static_cast<double>(end - begin);
      seen += static_cast<Index>(end - begin);
    }
    adam.end_epoch();

    const double val_loss = loss_mse(network.predict(val_x), val_y);
    if (!std::isfinite(val_loss)) throw NumericalError(divergence_message(epoch, adam.iterations(), val_loss));
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(seen), val_loss, adam.current_learning_rate()});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.network = network;
    }
  }
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,lr\n";
  out.precision(10);
  for (const auto& r : history) {
    out << r.epoch << ',';
    if (std::isfinite(r.train_loss)) out << r.train_loss;
    out << ',' << r.val_loss << ',' << r.learning_rate << '\n';
  }
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(Network& network, const MatrixXd& inputs, const MatrixXd& targets,
                           double eps) {
  if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");
  const MatrixXd pred = network.forward(inputs, Mode::Train);
  network.backward(loss_mse_gradient(pred, targets));

  GradCheckReport report;
  for (std::size_t li = 0; li < network.depth(); ++li) {
    Layer& layer = network.layer(li);
    const auto params = layer.parameters();
    const auto grads = layer.gradients();
    const auto names = layer.parameter_names();
    for (std::size_t k = 0; k < params.size(); ++k) {
      const MatrixXd analytic = *grads[k];
      MatrixXd& p = *params[k];
      TensorDeviation dev{li, layer.type(), names[k], 0.0, analytic.cwiseAbs().maxCoeff()};
      for (Index idx = 0; idx < p.size(); ++idx) {
        const double saved = p.data()[idx];
        p.data()[idx] = saved + eps;
        const double up = loss_mse(network.forward(inputs, Mode::Train), targets);
        p.data()[idx] = saved - eps;
        const double down = loss_mse(network.forward(inputs, Mode::Train), targets);
        p.data()[idx] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic.data()[idx];
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-7});
        dev.max_relative_deviation = std::max(dev.max_relative_deviation, rel);
      }
      report.max_relative_deviation = std::max(report.max_relative_deviation, dev.max_relative_deviation);
      report.tensors.push_back(dev);
    }
  }
  // leave the caches consistent with the unperturbed parameters
  network.forward(inputs, Mode::Train);
  return report;
}

// ---------------------------------------------------------------------------
// Shallow forward fit

MatrixXd train_shallow_forward(const MatrixXd& compositions, const MatrixXd& observations,
                               const ShallowFitOptions& options) {
  const Index n = compositions.rows();
  if (n < 1 || observations.rows() != n) throw ValidationError("train_shallow_forward: row mismatch");
  const Index M = compositions.cols();
  const Index L = observations.cols();

  Dense layer(M, L, false);
  const double scale = 2.0 / static_cast<double>(n * L);
  const MatrixXd gram = compositions.transpose() * compositions;
  const double lambda_max = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .maxCoeff();
  if (!(lambda_max > 0.0)) throw NumericalError("train_shallow_forward: zero Gram matrix");
  const double step = 1.0 / (scale * lambda_max);

  const MatrixXd x = compositions.transpose();
  const MatrixXd target = observations.transpose();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    const MatrixXd out = layer.forward(x, Mode::Train);
    const double loss = (out - target).squaredNorm() / static_cast<double>(out.size());
    if (!std::isfinite(loss)) throw NumericalError("train_shallow_forward diverged at iteration " + std::to_string(it));
    if (loss <= options.tolerance * options.tolerance) break;
    if (std::isfinite(prev) && prev - loss <= options.tolerance * prev) break;
    prev = loss;
    layer.accumulate(scale * (out - target));
    layer.weights() -= step * *layer.gradients()[0];
  }
  return layer.weights();
}

MatrixXd equivalent_biased_weights(const MatrixXd& W, const VectorXd& b, double K) {
  if (b.size() != W.rows()) throw ValidationError("equivalent_biased_weights: bias length mismatch");
  if (!(K != 0.0)) throw ValidationError("equivalent_biased_weights: K must be nonzero");
  return W - b * Eigen::RowVectorXd::Ones(W.cols()) / K;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json matrix_to_json(const MatrixXd& A) {
  json rows = json::array();
  for (Index i = 0; i < A.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    throw ValidationError("checkpoint: bad shape for " + what);
  MatrixXd A(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ValidationError("checkpoint: bad shape for " + what);
    for (Index c = 0; c < cols; ++c) A(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return A;
}

}  // namespace

void save_checkpoint(const Network& network, const std::filesystem::path& path) {
  json layers = json::array();
  for (std::size_t i = 0; i < network.depth(); ++i) {
    const Layer& l = network.layer(i);
    json entry{{"type", l.type()}};
    if (const auto* d = dynamic_cast<const Dense*>(&l)) {
      entry["in"] = d->weights().cols();
      entry["out"] = d->weights().rows();
      entry["bias"] = d->use_bias();
      entry["W"] = matrix_to_json(d->weights());
      if (d->use_bias()) entry["b"] = matrix_to_json(d->bias());
    } else if (const auto* bn = dynamic_cast<const BatchNorm*>(&l)) {
      auto& m = const_cast<BatchNorm&>(*bn);
      entry["dim"] = m.scale().rows();
      entry["momentum"] = m.momentum();
      entry["epsilon"] = m.epsilon();
      entry["gamma"] = matrix_to_json(m.scale());
      entry["beta"] = matrix_to_json(m.shift());
      entry["running_mean"] = matrix_to_json(m.running_mean());
      entry["running_var"] = matrix_to_json(m.running_variance());
    }
    layers.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << json{{"format", "compinv-network-1"}, {"layers", layers}}.dump(1) << '\n';
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  if (doc.value("format", "") != "compinv-network-1") throw ValidationError("checkpoint: unknown format");
  Network net;
  try {
    for (const json& entry : doc.at("layers")) {
      const std::string type = entry.at("type").get<std::string>();
      if (type == "dense") {
        const Index fan_in = entry.at("in").get<Index>(), fan_out = entry.at("out").get<Index>();
        auto d = std::make_unique<Dense>(fan_in, fan_out, entry.at("bias").get<bool>());
        d->weights() = matrix_from_json(entry.at("W"), fan_out, fan_in, "W");
        if (d->use_bias()) d->bias() = matrix_from_json(entry.at("b"), fan_out, 1, "b");
        net.add(std::move(d));
      } else if (type == "batchnorm") {
        const Index dim = entry.at("dim").get<Index>();
        auto bn = std::make_unique<BatchNorm>(dim, entry.at("momentum").get<double>(),
                                              entry.at("epsilon").get<double>());
        bn->scale() = matrix_from_json(entry.at("gamma"), dim, 1, "gamma");
        bn->shift() = matrix_from_json(entry.at("beta"), dim, 1, "beta");
        bn->running_mean() = matrix_from_json(entry.at("running_mean"), dim, 1, "running_mean");
        bn->running_variance() = matrix_from_json(entry.at("running_var"), dim, 1, "running_var");
        net.add(std::move(bn));
      } else if (type == "sigmoid") {
        net.add(std::make_unique<Sigmoid>());
      } else if (type == "relu") {
        net.add(std::make_unique<Relu>());
      } else if (type == "simplex-scale") {
        net.add(std::make_unique<SimplexScale>());
      } else {
        throw ValidationError("checkpoint: unknown layer type " + type);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
  return net;
}

}  // namespace compinv::mlp
