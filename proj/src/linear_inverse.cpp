#include "compinv/linear_inverse.hpp"

#include <string>

namespace compinv {

LinearFit mle_system_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                            const std::optional<Eigen::MatrixXd>& H_true) {
  if (X.rows() != Y.rows()) throw ValidationError("mle_system_matrix: row counts differ");
  const Index M = X.cols();
  if (X.rows() < M) {
    throw RankDeficiencyError("mle_system_matrix: fewer samples than unknowns", X.rows(), M);
  }
  const Eigen::MatrixXd gram = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double largest = ev.size() ? ev(ev.size() - 1) : 0.0;
  Index rank = 0;
  for (Index k = 0; k < ev.size(); ++k) rank += ev(k) > kSingularCutoff * largest ? 1 : 0;
  if (rank < M) {
    throw RankDeficiencyError("mle_system_matrix: composition Gram matrix is singular", rank, M);
  }

  LinearFit fit;
  // Solve (X^T X) H_hat^T = X^T Y.
  fit.H_hat = gram.ldlt().solve(X.transpose() * Y).transpose();
  fit.singular_values = singular_values(fit.H_hat);
  fit.condition_number = condition_number(fit.H_hat);
  if (H_true) {
    if (H_true->rows() != fit.H_hat.rows() || H_true->cols() != fit.H_hat.cols()) {
      throw ValidationError("mle_system_matrix: reference matrix has the wrong shape");
    }
    fit.frob_rel_err = (*H_true - fit.H_hat).norm() / H_true->norm();
  }
  return fit;
}

// ---------------------------------------------------------------------------

PseudoInverseEstimator::PseudoInverseEstimator(const Eigen::MatrixXd& H, ComponentwiseInverse g_inv)
    : pinv_(pseudo_inverse(H)), g_inv_(std::move(g_inv)) {}

Eigen::VectorXd PseudoInverseEstimator::estimate(const Eigen::VectorXd& s) const {
  if (s.size() != pinv_.cols()) throw ValidationError("estimate: observation dimension mismatch");
  Eigen::VectorXd x = pinv_ * s;
  if (g_inv_) x = g_inv_(x);
  return project_to_simplex(x);
}

Eigen::MatrixXd PseudoInverseEstimator::estimate_rows(const Eigen::MatrixXd& Y) const {
  if (Y.cols() != pinv_.cols()) throw ValidationError("estimate_rows: observation dimension mismatch");
  Eigen::MatrixXd raw = Y * pinv_.transpose();
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Index i = 0; i < raw.rows(); ++i) {
    Eigen::VectorXd x = raw.row(i).transpose();
    if (g_inv_) x = g_inv_(x);
    out.row(i) = project_to_simplex(x).transpose();
  }
  return out;
}

CompositionVector oracle_estimate(const Eigen::MatrixXd& H, const Eigen::VectorXd& s,
                                  const ComponentwiseInverse& g_inv) {
  return CompositionVector(PseudoInverseEstimator(H, g_inv).estimate(s));
}

// ---------------------------------------------------------------------------

namespace {

void check_block_shapes(const Eigen::MatrixXd& H, const Eigen::MatrixXd& H1, double m1_l1,
                        double sigma, const std::optional<Eigen::VectorXd>& m1,
                        const char* who) {
  if (H1.rows() != H.rows()) {
    throw ValidationError(std::string(who) + ": H and H1 need the same row count");
  }
  if (!(m1_l1 >= 0.0 && m1_l1 <= 1.0)) {
    throw ValidationError(std::string(who) + ": ||m1||_1 must lie in [0, 1]");
  }
  if (sigma < 0.0) throw ValidationError(std::string(who) + ": sigma must be >= 0");
  if (m1 && m1->size() != H1.cols()) {
    throw ValidationError(std::string(who) + ": m1 dimension does not match H1");
  }
}

double largest_singular_value(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  return singular_values(A)(0);
}

}  // namespace

ObfuscatedBound obfuscated_error_bound(const Eigen::MatrixXd& H, const Eigen::MatrixXd& H1,
                                       double m1_l1, double sigma,
                                       const std::optional<Eigen::VectorXd>& m1) {
  check_block_shapes(H, H1, m1_l1, sigma, m1, "obfuscated_error_bound");
  const Eigen::MatrixXd pinv = pseudo_inverse(H);
  const Eigen::MatrixXd leak = pinv * H1;

  ObfuscatedBound out;
  const double d = unconstrained_oracle_error(H, sigma) / 100.0;
  out.oracle_term = d * d;
  const double s_max = largest_singular_value(leak);
  out.obfuscating_term = m1_l1 * s_max * s_max;
  out.bound = out.obfuscating_term + out.oracle_term;
  if (m1) out.exact = (leak * *m1).squaredNorm() + out.oracle_term;
  return out;
}

MyopicResidual myopic_residual_bound(const Eigen::MatrixXd& H, const Eigen::MatrixXd& H1,
                                     double m1_l1, double sigma,
                                     const std::optional<Eigen::VectorXd>& m1) {
  check_block_shapes(H, H1, m1_l1, sigma, m1, "myopic_residual_bound");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeFullU);
  const Index L = H.rows();
  const Index M = H.cols();
  if (L <= M) throw ValidationError("myopic_residual_bound: needs an overdetermined H");
  const Eigen::MatrixXd U1 = svd.matrixU().rightCols(L - M);

  MyopicResidual out;
  out.noise_term = sigma * sigma * static_cast<double>(L - M);
  out.first_power_bound = m1_l1 * largest_singular_value(U1.transpose() * H1) + out.noise_term;
  if (m1) out.exact = (U1.transpose() * (H1 * *m1)).squaredNorm() + out.noise_term;
  return out;
}

ThresholdingFloor thresholding_floor(double T) {
  if (!(T > 0.0 && T <= 1.0)) throw ValidationError("thresholding_floor: T must lie in (0, 1]");
  return {T / 2.0, std::sqrt(T * T * T / 12.0)};
}

}  // namespace compinv
