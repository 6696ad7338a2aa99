#include "compinv/systems.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "compinv/errors.hpp"

namespace compinv {

namespace {

constexpr std::array<std::pair<SystemKind, std::string_view>, 13> kKindNames{{
    {SystemKind::Linear, "linear"},
    {SystemKind::InvertibleG, "invertible-g"},
    {SystemKind::NoninvertibleG, "noninvertible-g"},
    {SystemKind::ObfuscatedInvertible, "obfuscated-invertible"},
    {SystemKind::ObfuscatedNoninvertible, "obfuscated-noninvertible"},
    {SystemKind::ScaledMagnitude, "scaled-magnitude"},
    {SystemKind::Correlated, "correlated"},
    {SystemKind::MovingPeak, "moving-peak"},
    {SystemKind::MovingPeakCorrelated, "moving-peak-correlated"},
    {SystemKind::HighdimLinear, "highdim-linear"},
    {SystemKind::HighdimNonlinear, "highdim-nonlinear"},
    {SystemKind::HighdimNonlinearMaxNorm, "highdim-nonlinear-maxnorm"},
    {SystemKind::HighdimNonlinearL2Norm, "highdim-nonlinear-l2norm"},
}};

void require_shape(const Eigen::MatrixXd& H, Index cols, std::string_view who) {
  if (H.rows() < 1 || H.cols() != cols) {
    throw ValidationError(std::string(who) + ": system matrix must have " +
                          std::to_string(cols) + " columns");
  }
}

Eigen::MatrixXd table(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(rows.begin()->size());
  Eigen::MatrixXd out(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (const double x : row) out(i, j++) = x;
    ++i;
  }
  return out;
}

double soft_threshold(double x, double T) { return std::max(x - T, 0.0); }

bool is_noninvertible(SystemKind kind) {
  return kind == SystemKind::NoninvertibleG || kind == SystemKind::ObfuscatedNoninvertible;
}

bool is_g_system(SystemKind kind) {
  return kind == SystemKind::InvertibleG || kind == SystemKind::NoninvertibleG ||
         kind == SystemKind::ObfuscatedInvertible || kind == SystemKind::ObfuscatedNoninvertible;
}

bool is_highdim_nonlinear(SystemKind kind) {
  return kind == SystemKind::HighdimNonlinear || kind == SystemKind::HighdimNonlinearMaxNorm ||
         kind == SystemKind::HighdimNonlinearL2Norm;
}

}  // namespace

std::string_view to_string(SystemKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

SystemKind system_kind_from_string(std::string_view tag) {
  for (const auto& [k, name] : kKindNames) {
    if (name == tag) return k;
  }
  throw ValidationError("unknown system kind '" + std::string(tag) + "'");
}

// ---------------------------------------------------------------------------

Eigen::Vector3d g_invertible(const Eigen::Vector3d& m) {
  return {m(0) * m(0), std::sqrt(std::max(m(1), 0.0)) + 0.1, m(2)};
}

Eigen::Vector3d g_invertible_inv(const Eigen::Vector3d& x) {
  const double shifted = std::max(x(1) - 0.1, 0.0);
  return {std::sqrt(std::max(x(0), 0.0)), shifted * shifted, x(2)};
}

double g3(double x, double threshold) { return std::exp(std::max(0.0, x - threshold)) - 1.0; }

double g3_inv(double x, double threshold, double eps_log) {
  // a zero log term means the input sat in the thresholded region
  const double log_term = std::log(std::max(eps_log, x + 1.0));
  return log_term > 0.0 ? log_term + threshold : threshold / 2.0;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd build_gaussian_matrix(Index L, Index M, Rng& rng) {
  if (M < 1 || L < M) throw ValidationError("build_gaussian_matrix: need L >= M >= 1");
  Eigen::MatrixXd H(L, M);
  // Row-major fill order so the realization does not depend on storage layout.
  for (Index i = 0; i < L; ++i) {
    for (Index j = 0; j < M; ++j) H(i, j) = rng.normal();
  }
  return H;
}

Eigen::VectorXd radial_basis(Index L, double a, double b) {
  Eigen::VectorXd out(L);
  for (Index i = 0; i < L; ++i) {
    const double d = static_cast<double>(i + 1) - a;
    out(i) = std::exp(-d * d / (2.0 * b * b));
  }
  return out;
}

Eigen::MatrixXd build_rbf_matrix(Index L) {
  if (L != 1000) throw ValidationError("build_rbf_matrix: the bump layout requires L = 1000");
  auto phi = [L](double a, double b) { return radial_basis(L, a, b); };
  const Eigen::VectorXd broad = phi(850, 200);
  const Eigen::VectorXd tail = phi(1500, 500);

  Eigen::MatrixXd H(L, 20);
  H.col(0) = phi(100, 10);
  H.col(1) = 0.2 * phi(120, 15) + 0.7 * phi(520, 30);
  H.col(2) = 0.8 * phi(120, 17) + 0.1 * phi(525, 25);
  H.col(3) = 0.6 * phi(200, 40);
  H.col(4) = 0.4 * phi(300, 100);
  H.col(5) = 0.6 * phi(400, 40);
  H.col(6) = 0.9 * phi(500, 15);
  H.col(7) = 0.5 * phi(600, 10);
  H.col(8) = phi(700, 60);
  H.col(9) = 0.2 * phi(800, 15) + 0.4 * phi(330, 30);
  H.col(10) = broad - 0.3 * phi(700, 30) - 0.1 * phi(890, 8);
  H.col(11) = (3.0 * tail) / (3.0 * tail).maxCoeff();
  H.col(12) = 0.7 * broad + 0.2 * tail / tail.maxCoeff();
  H.col(13) = broad - 0.7 * phi(900, 10) - 0.9 * phi(810, 6);
  H.col(14) = broad - 0.7 * phi(900, 10) - 0.2 * phi(830, 15);
  H.col(15) = broad - 0.7 * phi(900, 10) - 0.1 * phi(830, 20);
  H.col(16) = broad - 0.8 * phi(940, 15);
  H.col(17) = broad - 0.5 * phi(800, 10);
  H.col(18) = 0.1 * broad + 0.17 * phi(350, 30) + 0.1 * phi(450, 20);
  H.col(19) = 0.04 * phi(850, 500);

  if (H.minCoeff() < -1e-12) {
    throw NumericalError("build_rbf_matrix: response curve went negative beyond rounding");
  }
  return H.cwiseMax(0.0);
}

// ---------------------------------------------------------------------------

ForwardSystem::ForwardSystem(SystemKind kind, Eigen::MatrixXd H, Index L, Index M,
                             SystemParams params)
    : kind_(kind), H_(std::move(H)), L_(L), M_(M), params_(params) {}

ForwardSystem ForwardSystem::linear(Eigen::MatrixXd H) {
  if (H.rows() < 1 || H.cols() < 1) throw ValidationError("linear: empty system matrix");
  const Index L = H.rows(), M = H.cols();
  return ForwardSystem(SystemKind::Linear, std::move(H), L, M, {});
}

ForwardSystem ForwardSystem::invertible_g(Eigen::MatrixXd H) {
  require_shape(H, 3, "invertible-g");
  const Index L = H.rows();
  return ForwardSystem(SystemKind::InvertibleG, std::move(H), L, 3, {});
}

ForwardSystem ForwardSystem::noninvertible_g(Eigen::MatrixXd H, SystemParams params) {
  require_shape(H, 3, "noninvertible-g");
  if (!(params.threshold > 0.0 && params.threshold < 1.0)) {
    throw ValidationError("noninvertible-g: threshold must lie in (0, 1)");
  }
  const Index L = H.rows();
  return ForwardSystem(SystemKind::NoninvertibleG, std::move(H), L, 3, params);
}

ForwardSystem ForwardSystem::obfuscated_invertible(Eigen::MatrixXd H) {
  require_shape(H, 4, "obfuscated-invertible");
  const Index L = H.rows();
  ForwardSystem sys(SystemKind::ObfuscatedInvertible, std::move(H), L, 4, {});
  sys.obfuscating_ = {3};
  return sys;
}

ForwardSystem ForwardSystem::obfuscated_noninvertible(Eigen::MatrixXd H, SystemParams params) {
  require_shape(H, 4, "obfuscated-noninvertible");
  if (!(params.threshold > 0.0 && params.threshold < 1.0)) {
    throw ValidationError("obfuscated-noninvertible: threshold must lie in (0, 1)");
  }
  const Index L = H.rows();
  ForwardSystem sys(SystemKind::ObfuscatedNoninvertible, std::move(H), L, 4, params);
  sys.obfuscating_ = {3};
  return sys;
}

ForwardSystem ForwardSystem::scaled_magnitude(Eigen::MatrixXd H) {
  if (H.rows() < 1 || H.cols() < 1) throw ValidationError("scaled-magnitude: empty matrix");
  const Index L = H.rows(), M = H.cols();
  return ForwardSystem(SystemKind::ScaledMagnitude, std::move(H), L, M, {});
}

ForwardSystem ForwardSystem::correlated(Eigen::MatrixXd H) {
  require_shape(H, 5, "correlated");
  const Index L = H.rows();
  return ForwardSystem(SystemKind::Correlated, std::move(H), L, 3, {});
}

ForwardSystem ForwardSystem::moving_peak(Index L) {
  if (L < 1) throw ValidationError("moving-peak: L must be >= 1");
  ForwardSystem sys(SystemKind::MovingPeak, Eigen::MatrixXd(), L, 3, {});
  sys.A_ = table({{2, 0.7, 0.8}, {1, 1.5, 0.3}});
  sys.B_ = table({{4, 2.7, 0.8}, {0, 3.5, 4.3}});
  return sys;
}

ForwardSystem ForwardSystem::moving_peak_correlated(Index L) {
  if (L < 1) throw ValidationError("moving-peak-correlated: L must be >= 1");
  ForwardSystem sys(SystemKind::MovingPeakCorrelated, Eigen::MatrixXd(), L, 3, {});
  sys.A_ = table({{2, 0.7, 0.8, 2.2, 0.5}, {1, 1.5, 0.3, 0.9, 0.2}});
  sys.B_ = table({{4, 2.7, 0.8, 2.3, 3.1}, {0, 3.5, 4.3, 2.0, 3.2}});
  return sys;
}

ForwardSystem ForwardSystem::highdim_linear(Eigen::MatrixXd H) {
  if (H.rows() < 1 || H.cols() < 1) throw ValidationError("highdim-linear: empty matrix");
  for (Index j = 0; j < H.cols(); ++j) {
    if (H.col(j).minCoeff() < 0.0) {
      throw ValidationError("highdim-linear: column " + std::to_string(j) + " has negative entries");
    }
  }
  const Index L = H.rows(), M = H.cols();
  return ForwardSystem(SystemKind::HighdimLinear, std::move(H), L, M, {});
}

ForwardSystem ForwardSystem::highdim_nonlinear(Eigen::MatrixXd H, SystemKind kind,
                                               SystemParams params) {
  if (!is_highdim_nonlinear(kind)) {
    throw ValidationError("highdim_nonlinear: kind must be one of the highdim-nonlinear variants");
  }
  require_shape(H, 20, "highdim-nonlinear");
  const Index L = H.rows();
  ForwardSystem sys(kind, std::move(H), L, 20, params);
  sys.obfuscating_ = {18, 19};
  sys.bump_350_130_ = radial_basis(L, 350, 130);
  sys.bump_450_70_ = radial_basis(L, 450, 70);
  sys.bump_850_200_ = radial_basis(L, 850, 200);
  sys.bump_810_6_ = radial_basis(L, 810, 6);
  return sys;
}

// ---------------------------------------------------------------------------

std::vector<Index> ForwardSystem::visible_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < M_; ++i) {
    if (std::find(obfuscating_.begin(), obfuscating_.end(), i) == obfuscating_.end()) {
      out.push_back(i);
    }
  }
  return out;
}

Eigen::VectorXd ForwardSystem::intermediates(const Eigen::VectorXd& m) const {
  if (m.size() != M_) throw ValidationError("intermediates: dimension mismatch");
  if (is_g_system(kind_)) {
    Eigen::Vector3d z = g_invertible(m.head<3>());
    if (is_noninvertible(kind_)) z(2) = g3(m(2), params_.threshold);
    if (M_ == 3) return z;
    Eigen::VectorXd full(M_);
    full << z, m.tail(M_ - 3);
    return full;
  }
  if (kind_ == SystemKind::Correlated) {
    Eigen::VectorXd z(5);
    z << m(0), 0.4 * m(1), 0.2 * m(0) * m(0), m(2) * m(2), m(0) * m(1);
    return z;
  }
  if (is_highdim_nonlinear(kind_)) {
    const double T = params_.highdim_threshold;
    Eigen::VectorXd z = m;
    z(3) = 0.0;   // carried by the moving peak
    z(13) = 0.0;  // carried by the moving valley
    z(8) = soft_threshold(m(8), T);
    z(10) = std::exp(soft_threshold(m(10), T)) - 1.0;
    z(16) = std::pow(std::max(m(16), 0.0), 1.5);
    z(17) = std::pow(std::max(m(17), 0.0), 0.9) + m(17) * m(17);
    return z;
  }
  throw ValidationError("intermediates: system kind '" + tag() + "' has no intermediate vector");
}

Eigen::VectorXd ForwardSystem::moving_peak_response(const Eigen::VectorXd& weights) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(L_);
  for (Index i = 0; i < weights.size(); ++i) {
    const double magnitude = (A_(0, i) - A_(1, i)) * weights(i) + A_(1, i);
    const double location = (B_(0, i) - B_(1, i)) * weights(i) + B_(1, i);
    for (Index v = 0; v < L_; ++v) {
      const double d = static_cast<double>(v + 1) - location;
      out(v) += magnitude * std::exp(-d * d);
    }
  }
  return out;
}

Eigen::VectorXd ForwardSystem::highdim_response(const Eigen::VectorXd& m) const {
  Eigen::VectorXd out = H_ * intermediates(m);

  const double peak = 100.0 * m(3) + 200.0;
  out += 0.6 * m(3) * radial_basis(L_, peak, 40.0);

  const double valley = 100.0 * (1.0 - m(13)) + 820.0;
  out += m(13) * (bump_850_200_ - 0.7 * radial_basis(L_, valley, 10.0) - 0.9 * bump_810_6_);

  // Correlated extension g(x) = (x1, x2, x3, x1 x2, 3 x2 x3) of (m5, m6, m7).
  out += (m(4) * m(5)) * bump_350_130_;
  out += (3.0 * m(5) * m(6)) * bump_450_70_;

  if (kind_ == SystemKind::HighdimNonlinearMaxNorm) {
    const double peak_value = out.maxCoeff();
    if (!(peak_value > 0.0)) throw NumericalError("highdim-nonlinear-maxnorm: nonpositive maximum");
    out /= peak_value;
  } else if (kind_ == SystemKind::HighdimNonlinearL2Norm) {
    const double norm = out.norm();
    if (!(norm > 0.0)) throw NumericalError("highdim-nonlinear-l2norm: zero response");
    out /= norm;
  }
  return out;
}

Eigen::VectorXd ForwardSystem::apply(const Eigen::VectorXd& m) const {
  if (m.size() != M_) {
    throw ValidationError("apply: composition has dimension " + std::to_string(m.size()) +
                          ", system expects " + std::to_string(M_));
  }
  switch (kind_) {
    case SystemKind::Linear:
    case SystemKind::HighdimLinear:
      return H_ * m;
    case SystemKind::InvertibleG:
    case SystemKind::NoninvertibleG:
    case SystemKind::ObfuscatedInvertible:
    case SystemKind::ObfuscatedNoninvertible:
    case SystemKind::Correlated:
      return H_ * intermediates(m);
    case SystemKind::ScaledMagnitude: {
      const Eigen::VectorXd hm = H_ * m;
      return hm.squaredNorm() * hm;
    }
    case SystemKind::MovingPeak:
      return moving_peak_response(m);
    case SystemKind::MovingPeakCorrelated: {
      Eigen::VectorXd w(5);
      w << m(0), 0.4 * m(1), 0.2 * m(0) * m(0), m(2) * m(2), m(1) * m(2);
      return moving_peak_response(w);
    }
    case SystemKind::HighdimNonlinear:
    case SystemKind::HighdimNonlinearMaxNorm:
    case SystemKind::HighdimNonlinearL2Norm:
      return highdim_response(m);
  }
  throw ValidationError("apply: unhandled system kind");
}

Eigen::MatrixXd ForwardSystem::apply_rows(const Eigen::MatrixXd& X) const {
  if (X.cols() != M_) throw ValidationError("apply_rows: column count must equal input_dim");
  if (kind_ == SystemKind::Linear || kind_ == SystemKind::HighdimLinear) {
    return X * H_.transpose();
  }
  Eigen::MatrixXd Y(X.rows(), L_);
  for (Index i = 0; i < X.rows(); ++i) Y.row(i) = apply(X.row(i).transpose()).transpose();
  return Y;
}

bool ForwardSystem::has_linear_core() const noexcept {
  return kind_ == SystemKind::Linear || kind_ == SystemKind::HighdimLinear || is_g_system(kind_);
}

Eigen::MatrixXd ForwardSystem::linear_core() const {
  if (!has_linear_core()) {
    throw ValidationError("linear_core: system kind '" + tag() + "' has no linear core");
  }
  return H_.leftCols(visible_dim());
}

Eigen::MatrixXd ForwardSystem::core_features(const Eigen::MatrixXd& visible_rows) const {
  if (!has_linear_core()) {
    throw ValidationError("core_features: system kind '" + tag() + "' has no linear core");
  }
  if (visible_rows.cols() != visible_dim()) {
    throw ValidationError("core_features: expected visible compositions");
  }
  if (!is_g_system(kind_)) return visible_rows;
  Eigen::MatrixXd out(visible_rows.rows(), 3);
  for (Index i = 0; i < visible_rows.rows(); ++i) {
    Eigen::Vector3d z = g_invertible(visible_rows.row(i).transpose());
    if (is_noninvertible(kind_)) z(2) = g3(visible_rows(i, 2), params_.threshold);
    out.row(i) = z.transpose();
  }
  return out;
}

Eigen::VectorXd ForwardSystem::core_inverse(const Eigen::VectorXd& x) const {
  if (!is_g_system(kind_)) return x;
  if (x.size() != 3) throw ValidationError("core_inverse: expected a 3-vector");
  Eigen::Vector3d out = g_invertible_inv(x);
  if (is_noninvertible(kind_)) out(2) = g3_inv(x(2), params_.threshold, params_.eps_log);
  return out;
}

}  // namespace compinv
