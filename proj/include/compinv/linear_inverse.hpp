#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "compinv/errors.hpp"
#include "compinv/simplex.hpp"

namespace compinv {

/// Relative singular-value cutoff below which a direction counts as rank-deficient.
inline constexpr double kSingularCutoff = 1e-12;

template <typename Derived>
Vector<typename Derived::Scalar> singular_values(const Eigen::MatrixBase<Derived>& H) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(H.derived());
  return svd.singularValues();
}

/// s_1 / s_min; infinite when the smallest singular value is zero.
template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& H) {
  const auto s = singular_values(H);
  using Scalar = typename Derived::Scalar;
  if (s.size() == 0) return Scalar(0);
  const Scalar smallest = s(s.size() - 1);
  return smallest > Scalar(0) ? s(0) / smallest : std::numeric_limits<Scalar>::infinity();
}

/// (H^T H)^-1 H^T via SVD. Throws RankDeficiencyError when H lacks full column rank at
/// the relative cutoff.
template <typename Derived>
Matrix<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& H) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(H.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = Scalar(kSingularCutoff) * (s.size() ? s(0) : Scalar(0));
  Index rank = 0;
  for (Index k = 0; k < s.size(); ++k) rank += s(k) > cutoff ? 1 : 0;
  if (rank < H.cols() || s.size() == 0) {
    throw RankDeficiencyError("pseudo_inverse: system matrix is rank deficient", rank, H.cols());
  }
  return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

/// Expected l2 error of the unconstrained oracle, 100 sigma sqrt(sum_k s_k^-2), in percent.
template <typename Derived>
typename Derived::Scalar unconstrained_oracle_error(const Eigen::MatrixBase<Derived>& H,
                                                    typename Derived::Scalar sigma) {
  using Scalar = typename Derived::Scalar;
  if (sigma < Scalar(0)) throw ValidationError("unconstrained_oracle_error: sigma must be >= 0");
  const auto s = singular_values(H);
  if (s.size() < H.cols() || s(s.size() - 1) <= Scalar(kSingularCutoff) * s(0)) {
    Index rank = 0;
    for (Index k = 0; k < s.size(); ++k) rank += s(k) > Scalar(kSingularCutoff) * s(0) ? 1 : 0;
    throw RankDeficiencyError("unconstrained_oracle_error: rank deficient system", rank, H.cols());
  }
  return Scalar(100) * sigma * std::sqrt(s.array().square().inverse().sum());
}

// ---------------------------------------------------------------------------

struct LinearFit {
  Eigen::MatrixXd H_hat;
  Eigen::VectorXd singular_values;
  double condition_number = 0.0;
  std::optional<double> frob_rel_err;
};

/// Least-squares system matrix from row-sample matrices X (n x M) and Y (n x L):
/// H_hat = Y^T X (X^T X)^-1, minimizing ||Y - X H_hat^T||_F.
///
/// Throws RankDeficiencyError naming the deficient dimension when the M x M Gram matrix
/// of the compositions is singular.
LinearFit mle_system_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                            const std::optional<Eigen::MatrixXd>& H_true = std::nullopt);

using ComponentwiseInverse = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// The cascade P(g_inv(H^+ s)) with a precomputed pseudo-inverse.
class PseudoInverseEstimator {
 public:
  explicit PseudoInverseEstimator(const Eigen::MatrixXd& H, ComponentwiseInverse g_inv = {});

  Eigen::VectorXd estimate(const Eigen::VectorXd& s) const;
  /// Row-wise estimates for an n x L observation matrix.
  Eigen::MatrixXd estimate_rows(const Eigen::MatrixXd& Y) const;
  const Eigen::MatrixXd& pinv() const noexcept { return pinv_; }

 private:
  Eigen::MatrixXd pinv_;
  ComponentwiseInverse g_inv_;
};

/// One-shot oracle cascade; g_inv defaults to the identity.
CompositionVector oracle_estimate(const Eigen::MatrixXd& H, const Eigen::VectorXd& s,
                                  const ComponentwiseInverse& g_inv = {});

/// Squared-error bound for the myopic estimator that inverts with H while the truth also
/// drives an unmodeled block H1 m1.
struct ObfuscatedBound {
  /// sigma^2 sum_k s_k^-2.
  double oracle_term = 0.0;
  /// ||m1||_1 s_max(H^+ H1)^2.
  double obfuscating_term = 0.0;
  /// obfuscating_term + oracle_term.
  double bound = 0.0;
  /// ||H^+ H1 m1||^2 + oracle_term, when m1 is supplied.
  std::optional<double> exact;
};

ObfuscatedBound obfuscated_error_bound(const Eigen::MatrixXd& H, const Eigen::MatrixXd& H1,
                                       double m1_l1, double sigma,
                                       const std::optional<Eigen::VectorXd>& m1 = std::nullopt);

/// Expected squared measurement residual of the unconstrained myopic fit,
/// ||P_perp H1 m1||^2 + sigma^2 tr(P_perp), next to the printed first-power bound
/// ||m1||_1 s_max(U1^T H1) + tr(P_perp) sigma^2. The first-power form is dimensionally
/// inconsistent with the squared left side and is reported for comparison only.
struct MyopicResidual {
  double noise_term = 0.0;
  double first_power_bound = 0.0;
  std::optional<double> exact;
};

MyopicResidual myopic_residual_bound(const Eigen::MatrixXd& H, const Eigen::MatrixXd& H1,
                                     double m1_l1, double sigma,
                                     const std::optional<Eigen::VectorXd>& m1 = std::nullopt);

/// Optimal constant estimate T/2 over a destroyed interval [0, T] and its RMS loss
/// sqrt(T^3 / 12) under a uniform unit-density prior.
struct ThresholdingFloor {
  double estimate = 0.0;
  double loss = 0.0;
};

ThresholdingFloor thresholding_floor(double T);

}  // namespace compinv
