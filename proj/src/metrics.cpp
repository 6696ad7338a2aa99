#include "compinv/metrics.hpp"

namespace compinv {

Eigen::MatrixXd normalized_truth_rows(const Eigen::MatrixXd& X, const std::vector<Index>& visible) {
  Eigen::MatrixXd out(X.rows(), static_cast<Index>(visible.size()));
  for (Index i = 0; i < X.rows(); ++i) {
    out.row(i) = normalized_truth(X.row(i).transpose(), visible).transpose();
  }
  return out;
}

double intensity_ratio(const ForwardSystem& a, const ForwardSystem& b, const Sampler& sampler,
                       Index n, Rng& rng) {
  if (a.input_dim() != b.input_dim() || sampler.dimension() != a.input_dim()) {
    throw ValidationError("intensity_ratio: systems and sampler must share the input dimension");
  }
  if (n < 1) throw ValidationError("intensity_ratio: n must be >= 1");
  const Eigen::MatrixXd X = sampler.draw(n, rng);
  const double mean_a = a.apply_rows(X).rowwise().norm().mean();
  const double mean_b = b.apply_rows(X).rowwise().norm().mean();
  if (!(mean_b > 0.0)) throw NumericalError("intensity_ratio: reference system has zero response");
  return mean_a / mean_b;
}

ErrorSummary summarize(const std::string& tag, const Eigen::MatrixXd& truth,
                       const Eigen::MatrixXd& est) {
  ErrorSummary out;
  out.estimator_tag = tag;
  out.e_percent = l2_error_percent(truth, est);
  out.aad_percent = aad_percent(truth, est);
  out.aad_mean_percent = out.aad_percent.mean();
  out.n = truth.rows();
  return out;
}

}  // namespace compinv
