#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

#include "compinv/random.hpp"
#include "compinv/simplex.hpp"

namespace compinv {

enum class SystemKind {
  Linear,
  InvertibleG,
  NoninvertibleG,
  ObfuscatedInvertible,
  ObfuscatedNoninvertible,
  ScaledMagnitude,
  Correlated,
  MovingPeak,
  MovingPeakCorrelated,
  HighdimLinear,
  HighdimNonlinear,
  HighdimNonlinearMaxNorm,
  HighdimNonlinearL2Norm,
};

std::string_view to_string(SystemKind kind);
/// Throws ValidationError on an unknown tag.
SystemKind system_kind_from_string(std::string_view tag);

// ---------------------------------------------------------------------------
// Componentwise transforms
// ---------------------------------------------------------------------------

/// (m1^2, sqrt(m2) + 0.1, m3).
Eigen::Vector3d g_invertible(const Eigen::Vector3d& m);
/// (sqrt(max(0, x1)), max(0, x2 - 0.1)^2, x3).
Eigen::Vector3d g_invertible_inv(const Eigen::Vector3d& x);

/// exp(max(0, x - T)) - 1.
double g3(double x, double threshold);
/// Recovers x' = log(max(eps_log, x + 1)) + T; returns x' when x' >= T, else T/2, the
/// l2-optimal constant over the destroyed interval [0, T].
double g3_inv(double x, double threshold, double eps_log = 1e-10);

// ---------------------------------------------------------------------------
// System matrices
// ---------------------------------------------------------------------------

/// L x M matrix of i.i.d. standard normals.
Eigen::MatrixXd build_gaussian_matrix(Index L, Index M, Rng& rng);

/// exp(-(v - a)^2 / (2 b^2)) on the index vector v = 1..L.
Eigen::VectorXd radial_basis(Index L, double a, double b);

/// The 1000 x 20 nonnegative response matrix built from radial basis bumps.
/// Rejects L != 1000 since the bump centers are calibrated to that grid.
Eigen::MatrixXd build_rbf_matrix(Index L = 1000);

// ---------------------------------------------------------------------------
// Forward systems
// ---------------------------------------------------------------------------

struct SystemParams {
  /// Threshold T of the g3 transform in the noninvertible presets.
  double threshold = 0.02;
  /// Floor inside the log of g3_inv.
  double eps_log = 1e-10;
  /// Soft threshold of the high-dimensional nonlinear system.
  double highdim_threshold = 0.03;
};

/// An immutable synthetic observation model h: S^M -> R^L.
///
/// Obfuscated kinds take the full composition (visible plus obfuscating components); the
/// estimators only ever see the visible part. Kinds built on a linear core H with a known
/// componentwise transform also expose that core for the oracle and benchmark estimators.
class ForwardSystem {
 public:
  static ForwardSystem linear(Eigen::MatrixXd H);
  static ForwardSystem invertible_g(Eigen::MatrixXd H);
  static ForwardSystem noninvertible_g(Eigen::MatrixXd H, SystemParams params = {});
  /// H is L x 4; component 4 (index 3) is obfuscating.
  static ForwardSystem obfuscated_invertible(Eigen::MatrixXd H);
  static ForwardSystem obfuscated_noninvertible(Eigen::MatrixXd H, SystemParams params = {});
  static ForwardSystem scaled_magnitude(Eigen::MatrixXd H);
  /// H is L x 5 acting on (m1, 0.4 m2, 0.2 m1^2, m3^2, m1 m2).
  static ForwardSystem correlated(Eigen::MatrixXd H);
  static ForwardSystem moving_peak(Index L = 5);
  static ForwardSystem moving_peak_correlated(Index L = 5);
  /// Requires every entry of H to be nonnegative.
  static ForwardSystem highdim_linear(Eigen::MatrixXd H);
  /// kind selects plain, max-normalized or l2-normalized output.
  static ForwardSystem highdim_nonlinear(Eigen::MatrixXd H,
                                         SystemKind kind = SystemKind::HighdimNonlinear,
                                         SystemParams params = {});

  SystemKind kind() const noexcept { return kind_; }
  std::string tag() const { return std::string(to_string(kind_)); }
  const SystemParams& params() const noexcept { return params_; }

  /// System matrix H; empty for the moving-peak kinds.
  const Eigen::MatrixXd& matrix() const noexcept { return H_; }
  /// Moving-peak magnitude (A) and location (B) tables, 2 x terms.
  const Eigen::MatrixXd& peak_magnitudes() const noexcept { return A_; }
  const Eigen::MatrixXd& peak_locations() const noexcept { return B_; }

  Index observation_dim() const noexcept { return L_; }
  Index input_dim() const noexcept { return M_; }
  Index visible_dim() const noexcept { return M_ - static_cast<Index>(obfuscating_.size()); }
  const std::vector<Index>& obfuscating_indices() const noexcept { return obfuscating_; }
  std::vector<Index> visible_indices() const;

  /// Noiseless response h(m). Throws ValidationError on a dimension mismatch.
  Eigen::VectorXd apply(const Eigen::VectorXd& m) const;
  /// Row-wise response of an n x M composition matrix.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& X) const;

  /// Intermediate vector z driving the linear core (g-systems, correlated and high-dim
  /// nonlinear kinds). Throws ValidationError for kinds without one.
  Eigen::VectorXd intermediates(const Eigen::VectorXd& m) const;

  /// True when an oracle cascade P(g_inv(H_v^+ s)) is defined.
  bool has_linear_core() const noexcept;
  /// H_v: the columns of H acting on the visible components.
  Eigen::MatrixXd linear_core() const;
  /// g applied to visible compositions, row-wise; the regressors for the benchmark MLE.
  Eigen::MatrixXd core_features(const Eigen::MatrixXd& visible_rows) const;
  /// Componentwise inverse of g (identity for linear kinds).
  Eigen::VectorXd core_inverse(const Eigen::VectorXd& x) const;

 private:
  ForwardSystem(SystemKind kind, Eigen::MatrixXd H, Index L, Index M, SystemParams params);

  Eigen::VectorXd moving_peak_response(const Eigen::VectorXd& weights) const;
  Eigen::VectorXd highdim_response(const Eigen::VectorXd& m) const;

  SystemKind kind_;
  Eigen::MatrixXd H_;
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
  Index L_ = 0;
  Index M_ = 0;
  SystemParams params_;
  std::vector<Index> obfuscating_;

  // Fixed bumps of the high-dimensional nonlinear system.
  Eigen::VectorXd bump_350_130_;
  Eigen::VectorXd bump_450_70_;
  Eigen::VectorXd bump_850_200_;
  Eigen::VectorXd bump_810_6_;
};

}  // namespace compinv
