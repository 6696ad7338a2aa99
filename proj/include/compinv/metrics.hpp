#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "compinv/dataset.hpp"
#include "compinv/errors.hpp"
#include "compinv/simplex.hpp"
#include "compinv/systems.hpp"

namespace compinv {

namespace detail {
template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string(who) + ": truth and estimate shapes differ");
  }
  if (a.rows() < 1) throw ValidationError(std::string(who) + ": need at least one sample");
}
}  // namespace detail

/// Mean over samples of the l2 distance between rows, times 100.
template <typename A, typename B>
typename A::Scalar l2_error_percent(const Eigen::MatrixBase<A>& truth,
                                    const Eigen::MatrixBase<B>& est) {
  detail::require_same_shape(truth, est, "l2_error_percent");
  using Scalar = typename A::Scalar;
  return Scalar(100) * (truth - est).rowwise().norm().mean();
}

/// Per-component mean absolute deviation, times 100.
template <typename A, typename B>
Vector<typename A::Scalar> aad_percent(const Eigen::MatrixBase<A>& truth,
                                       const Eigen::MatrixBase<B>& est) {
  detail::require_same_shape(truth, est, "aad_percent");
  using Scalar = typename A::Scalar;
  return Scalar(100) * (truth - est).cwiseAbs().colwise().mean().transpose();
}

/// Visible components rescaled to unit sum. Throws ValidationError if they are all zero.
template <typename Derived>
Vector<typename Derived::Scalar> normalized_truth(const Eigen::MatrixBase<Derived>& m_full,
                                                  const std::vector<Index>& visible) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(static_cast<Index>(visible.size()));
  for (std::size_t k = 0; k < visible.size(); ++k) {
    if (visible[k] < 0 || visible[k] >= m_full.size()) {
      throw ValidationError("normalized_truth: visible index out of range");
    }
    out(static_cast<Index>(k)) = m_full(visible[k]);
  }
  const Scalar total = out.template lpNorm<1>();
  if (!(total > Scalar(0))) throw ValidationError("normalized_truth: visible part is all zero");
  return out / total;
}

/// Row-wise normalized truth of an n x M composition matrix.
Eigen::MatrixXd normalized_truth_rows(const Eigen::MatrixXd& X, const std::vector<Index>& visible);

/// ||s - estimate||_2.
template <typename A, typename B>
typename A::Scalar projection_residual(const Eigen::MatrixBase<A>& s,
                                       const Eigen::MatrixBase<B>& estimate) {
  if (s.size() != estimate.size()) {
    throw ValidationError("projection_residual: dimension mismatch");
  }
  return (s - estimate).norm();
}

/// E||h_a(m)||_2 / E||h_b(m)||_2 over n common draws from the sampler.
double intensity_ratio(const ForwardSystem& a, const ForwardSystem& b, const Sampler& sampler,
                       Index n, Rng& rng);

struct ErrorSummary {
  std::string estimator_tag;
  double e_percent = 0.0;
  Eigen::VectorXd aad_percent;
  double aad_mean_percent = 0.0;
  Index n = 0;
  std::optional<double> bound_percent;
  double wall_time_s = 0.0;
};

ErrorSummary summarize(const std::string& tag, const Eigen::MatrixXd& truth,
                       const Eigen::MatrixXd& est);

}  // namespace compinv
