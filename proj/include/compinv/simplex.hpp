#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "compinv/errors.hpp"
#include "compinv/random.hpp"

namespace compinv {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Simplex membership and projection
// ---------------------------------------------------------------------------

/// True iff every component is >= -tol and the components sum to 1 within tol.
template <typename Derived>
bool is_on_simplex(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar tol) {
  if (x.size() == 0) return false;
  using Scalar = typename Derived::Scalar;
  return x.minCoeff() >= -tol && std::abs(x.sum() - Scalar(1)) <= tol;
}

/// Every row of `rows` lies on the simplex.
template <typename Derived>
bool rows_on_simplex(const Eigen::MatrixBase<Derived>& rows, typename Derived::Scalar tol) {
  for (Index i = 0; i < rows.rows(); ++i) {
    if (!is_on_simplex(rows.row(i), tol)) return false;
  }
  return true;
}

/// Clamp negatives to zero, then divide by the l1 norm.
///
/// An all-zero clamped vector maps to the centroid 1/M.
template <typename Derived>
Vector<typename Derived::Scalar> project_to_simplex(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> clamped = x.derived().reshaped().cwiseMax(Scalar(0));
  const Scalar total = clamped.sum();
  if (!(total > Scalar(0))) {
    return Vector<Scalar>::Constant(clamped.size(), Scalar(1) / Scalar(clamped.size()));
  }
  return clamped / total;
}

/// Row-wise projection of a sample matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> project_rows_to_simplex(const Eigen::MatrixBase<Derived>& rows) {
  Matrix<typename Derived::Scalar> out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) {
    out.row(i) = project_to_simplex(rows.row(i).transpose()).transpose();
  }
  return out;
}

/// A point on the M-simplex. Construction validates non-negativity and unit sum.
template <typename Scalar>
class Composition {
 public:
  static constexpr double kTolerance = 1e-9;

  explicit Composition(Vector<Scalar> values) : values_(std::move(values)) {
    if (!is_on_simplex(values_, Scalar(kTolerance))) {
      throw ValidationError("composition is not on the simplex");
    }
  }

  /// Projects arbitrary reals onto the simplex.
  template <typename Derived>
  static Composition projected(const Eigen::MatrixBase<Derived>& x) {
    return Composition(project_to_simplex(x), Unchecked{});
  }

  /// The i-th end-member e_i of the M-simplex.
  static Composition end_member(Index M, Index i) {
    Vector<Scalar> v = Vector<Scalar>::Zero(M);
    v(i) = Scalar(1);
    return Composition(std::move(v), Unchecked{});
  }

  const Vector<Scalar>& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  Scalar operator()(Index i) const { return values_(i); }

 private:
  struct Unchecked {};
  Composition(Vector<Scalar> values, Unchecked) : values_(std::move(values)) {}

  Vector<Scalar> values_;
};

using CompositionVector = Composition<double>;

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// n independent uniform draws on S^M, one per row (normalized unit exponentials).
Eigen::MatrixXd sample_uniform_simplex(Index M, Index n, Rng& rng);

/// Gaussian-mixture-plus-uniform generator on the simplex with an optional cap on
/// designated (obfuscating) components.
///
/// Centers are given in percent. Each is divided by 100 and renormalized, since printed
/// centers carry rounding residue. A draw picks a mixture component by its proportion
/// (or the uniform remainder), adds isotropic Gaussian noise with that component's
/// standard deviation (a fraction, not percent), truncates to [0, 1] and rescales by the
/// l1 norm. Draws whose capped components exceed `obfuscation_cap` are discarded.
struct MixtureSpec {
  Index dimension = 0;
  std::vector<Eigen::VectorXd> centers_percent;
  std::vector<double> sigmas;
  std::vector<double> proportions;
  double uniform_remainder = 1.0;
  double obfuscation_cap = 1.0;
  std::vector<Index> obfuscating_indices;

  /// Throws ValidationError when the invariants do not hold.
  void validate() const;

  /// Centers as compositions (percent / 100, renormalized).
  std::vector<Eigen::VectorXd> normalized_centers() const;

  /// Pure uniform sampler on S^M with optional caps.
  static MixtureSpec uniform(Index M, std::vector<Index> capped = {}, double cap = 1.0);

  /// The three-center, 20-component generator with caps of 5% on components 19 and 20
  /// (zero-based 18 and 19).
  static MixtureSpec highdim_reference();
};

/// Draws n samples; output order is shuffled. Fails with NumericalError if fewer than
/// one in a thousand draws pass the cap.
Eigen::MatrixXd sample_mixture(const MixtureSpec& spec, Index n, Rng& rng);

// ---------------------------------------------------------------------------
// Volume concentration on high-dimensional simplices
// ---------------------------------------------------------------------------

struct ConcentrationQuery {
  Index M = 2;
  double epsilon = 0.1;
  double c = 1.0;
  double a = 0.1;

  void validate() const;
};

/// Probability that a uniform draw lies within epsilon of some end-member, M eps^(M-1),
/// clamped to [0, 1]. Exact for epsilon <= 1/2, where the corner regions are disjoint.
double corner_mass(Index M, double epsilon);

/// P(x_1 > c/M) = (1 - c/M)^(M-1) for a uniform draw.
double tail_above_scaled_mean(Index M, double c);

/// Var(x_1) of the uniform distribution on S^M: (M-1) / ((M+1) M^2).
double uniform_component_variance(Index M);

/// Chebyshev bound on P(|x_1 - 1/M| >= a): min(1, Var(x_1) / a^2).
double band_bound(Index M, double a);

/// Monte-Carlo estimate alongside its standard error and the closed form it checks.
struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  double closed_form = 0.0;
  std::int64_t hits = 0;
  std::int64_t draws = 0;

  /// |estimate - closed_form| within `sigmas` standard errors. A zero standard error
  /// (no hits or all hits) accepts only when the closed form rounds to the same count.
  bool agrees(double sigmas = 3.0) const;
};

/// Fraction of uniform draws with any component >= 1 - epsilon.
McEstimate mc_corner_mass(Index M, double epsilon, std::int64_t draws, Rng& rng);

/// Fraction of uniform draws with the first component > threshold; closed form (1-T)^(M-1).
McEstimate mc_first_component_above(Index M, double threshold, std::int64_t draws, Rng& rng);

/// Fraction of uniform draws with x_1 > c/M.
McEstimate mc_tail_above_scaled_mean(Index M, double c, std::int64_t draws, Rng& rng);

/// Fraction of uniform draws with |x_1 - 1/M| >= a; closed form is the Chebyshev bound.
McEstimate mc_band_tail(Index M, double a, std::int64_t draws, Rng& rng);

}  // namespace compinv
