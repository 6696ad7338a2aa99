#include "compinv/simplex.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace compinv {

Eigen::MatrixXd sample_uniform_simplex(Index M, Index n, Rng& rng) {
  if (M < 1) throw ValidationError("sample_uniform_simplex: dimension must be >= 1");
  if (n < 0) throw ValidationError("sample_uniform_simplex: count must be >= 0");
  Eigen::MatrixXd out(n, M);
  for (Index i = 0; i < n; ++i) {
    double total = 0.0;
    for (Index j = 0; j < M; ++j) {
      const double e = rng.exponential();
      out(i, j) = e;
      total += e;
    }
    out.row(i) /= total;
  }
  return out;
}

// ---------------------------------------------------------------------------

void MixtureSpec::validate() const {
  if (dimension < 1) throw ValidationError("mixture: dimension must be >= 1");
  if (centers_percent.size() != sigmas.size() || centers_percent.size() != proportions.size()) {
    throw ValidationError("mixture: centers, sigmas and proportions must have equal length");
  }
  double total = uniform_remainder;
  if (uniform_remainder < 0.0) throw ValidationError("mixture: uniform_remainder must be >= 0");
  for (std::size_t k = 0; k < centers_percent.size(); ++k) {
    if (centers_percent[k].size() != dimension) {
      throw ValidationError("mixture: center " + std::to_string(k) + " has wrong dimension");
    }
    if (centers_percent[k].minCoeff() < 0.0 || !(centers_percent[k].sum() > 0.0)) {
      throw ValidationError("mixture: center " + std::to_string(k) +
                            " must be non-negative with positive sum");
    }
    if (sigmas[k] < 0.0) throw ValidationError("mixture: sigmas must be >= 0");
    if (proportions[k] < 0.0) throw ValidationError("mixture: proportions must be >= 0");
    total += proportions[k];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("mixture: proportions plus uniform_remainder must sum to 1");
  }
  if (!(obfuscation_cap > 0.0)) throw ValidationError("mixture: obfuscation_cap must be > 0");
  for (const Index i : obfuscating_indices) {
    if (i < 0 || i >= dimension) throw ValidationError("mixture: obfuscating index out of range");
  }
}

std::vector<Eigen::VectorXd> MixtureSpec::normalized_centers() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(centers_percent.size());
  for (const auto& c : centers_percent) {
    const Eigen::VectorXd fraction = c / 100.0;
    out.push_back(fraction / fraction.sum());
  }
  return out;
}

MixtureSpec MixtureSpec::uniform(Index M, std::vector<Index> capped, double cap) {
  MixtureSpec spec;
  spec.dimension = M;
  spec.uniform_remainder = 1.0;
  spec.obfuscation_cap = cap;
  spec.obfuscating_indices = std::move(capped);
  return spec;
}

MixtureSpec MixtureSpec::highdim_reference() {
  auto vec = [](std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (const double x : xs) v(i++) = x;
    return v;
  };
  MixtureSpec spec;
  spec.dimension = 20;
  spec.centers_percent = {
      vec({0.79, 1.59, 2.38, 3.17, 0.79, 53.17, 7.94, 1.59, 0.79, 1.59, 3.17, 0.79, 1.59, 0.79,
           15.87, 0.79, 0.79, 0.79, 0.79, 0.79}),
      vec({43.69, 1.94, 12.62, 3.88, 0.97, 1.94, 0.97, 19.42, 0.97, 1.94, 0.97, 0.97, 1.94, 0.97,
           1.94, 0.97, 0.97, 0.97, 0.97, 0.97}),
      vec({0.99, 9.90, 2.97, 3.96, 0.99, 16.83, 9.90, 1.98, 0.99, 1.98, 12.87, 0.99, 19.80, 0.99,
           9.90, 0.99, 0.99, 0.99, 0.99, 0.99}),
  };
  spec.sigmas = {0.01, 0.02, 0.03};
  spec.proportions = {0.2, 0.2, 0.3};
  spec.uniform_remainder = 0.3;
  spec.obfuscation_cap = 0.05;
  spec.obfuscating_indices = {18, 19};
  return spec;
}

namespace {

bool passes_cap(const MixtureSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (const Index i : spec.obfuscating_indices) {
    if (row(i) > spec.obfuscation_cap) return false;
  }
  return true;
}

}  // namespace

Eigen::MatrixXd sample_mixture(const MixtureSpec& spec, Index n, Rng& rng) {
  spec.validate();
  const Index M = spec.dimension;
  const auto centers = spec.normalized_centers();
  Eigen::MatrixXd out(n, M);
  Eigen::RowVectorXd draw(M);

  std::int64_t attempts = 0;
  for (Index accepted = 0; accepted < n;) {
    ++attempts;
    if (attempts > 10000 && static_cast<double>(accepted) < 1e-3 * static_cast<double>(attempts)) {
      throw NumericalError("sample_mixture: acceptance rate below 1e-3; check obfuscation_cap");
    }
    // Pick the source: center k with probability proportions[k], else uniform.
    double u = rng.uniform();
    std::size_t source = centers.size();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (u < spec.proportions[k]) {
        source = k;
        break;
      }
      u -= spec.proportions[k];
    }
    if (source == centers.size()) {
      double total = 0.0;
      for (Index j = 0; j < M; ++j) {
        draw(j) = rng.exponential();
        total += draw(j);
      }
      draw /= total;
    } else {
      for (Index j = 0; j < M; ++j) {
        draw(j) = std::clamp(centers[source](j) + spec.sigmas[source] * rng.normal(), 0.0, 1.0);
      }
      const double total = draw.sum();
      if (!(total > 0.0)) continue;
      draw /= total;
    }
    if (!passes_cap(spec, draw)) continue;
    out.row(accepted++) = draw;
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(std::span<Index>(order));
  Eigen::MatrixXd shuffled(n, M);
  for (Index i = 0; i < n; ++i) shuffled.row(i) = out.row(order[static_cast<std::size_t>(i)]);
  return shuffled;
}

// ---------------------------------------------------------------------------

void ConcentrationQuery::validate() const {
  if (M < 2) throw ValidationError("concentration query: M must be >= 2");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw ValidationError("concentration query: epsilon must lie in (0, 1]");
  }
  if (c < 0.0) throw ValidationError("concentration query: c must be >= 0");
  if (!(a > 0.0)) throw ValidationError("concentration query: a must be > 0");
}

double corner_mass(Index M, double epsilon) {
  ConcentrationQuery{M, epsilon, 0.0, 1.0}.validate();
  const double p = static_cast<double>(M) * std::pow(epsilon, static_cast<double>(M - 1));
  return std::clamp(p, 0.0, 1.0);
}

double tail_above_scaled_mean(Index M, double c) {
  if (M < 1) throw ValidationError("tail_above_scaled_mean: M must be >= 1");
  const double m = static_cast<double>(M);
  if (c < 0.0 || c > m) throw ValidationError("tail_above_scaled_mean: need 0 <= c <= M");
  return std::pow(1.0 - c / m, m - 1.0);
}

double uniform_component_variance(Index M) {
  if (M < 1) throw ValidationError("uniform_component_variance: M must be >= 1");
  const double m = static_cast<double>(M);
  return (m - 1.0) / ((m + 1.0) * m * m);
}

double band_bound(Index M, double a) {
  if (!(a > 0.0)) throw ValidationError("band_bound: a must be > 0");
  return std::min(1.0, uniform_component_variance(M) / (a * a));
}

// ---------------------------------------------------------------------------

bool McEstimate::agrees(double sigmas) const {
  const double n = static_cast<double>(draws);
  const double q = std::clamp(closed_form, 0.0, 1.0);
  const double se = std::max(standard_error, std::sqrt(q * (1.0 - q) / n));
  if (se == 0.0) return estimate == q;
  return std::abs(estimate - closed_form) <= sigmas * se;
}

namespace {

/// Counts uniform draws satisfying `hit` without materializing the sample matrix.
template <typename Predicate>
McEstimate count_uniform(Index M, std::int64_t draws, Rng& rng, double closed_form,
                         Predicate hit) {
  if (draws < 1) throw ValidationError("Monte-Carlo draw count must be >= 1");
  Eigen::VectorXd x(M);
  std::int64_t hits = 0;
  for (std::int64_t d = 0; d < draws; ++d) {
    double total = 0.0;
    for (Index j = 0; j < M; ++j) {
      x(j) = rng.exponential();
      total += x(j);
    }
    x /= total;
    if (hit(x)) ++hits;
  }
  McEstimate out;
  out.hits = hits;
  out.draws = draws;
  out.closed_form = closed_form;
  out.estimate = static_cast<double>(hits) / static_cast<double>(draws);
  out.standard_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(draws));
  return out;
}

}  // namespace

McEstimate mc_corner_mass(Index M, double epsilon, std::int64_t draws, Rng& rng) {
  const double threshold = 1.0 - epsilon;
  return count_uniform(M, draws, rng, corner_mass(M, epsilon),
                       [&](const Eigen::VectorXd& x) { return x.maxCoeff() >= threshold; });
}

McEstimate mc_first_component_above(Index M, double threshold, std::int64_t draws, Rng& rng) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw ValidationError("mc_first_component_above: threshold must lie in [0, 1)");
  }
  const double closed = std::pow(1.0 - threshold, static_cast<double>(M - 1));
  return count_uniform(M, draws, rng, closed,
                       [&](const Eigen::VectorXd& x) { return x(0) > threshold; });
}

McEstimate mc_tail_above_scaled_mean(Index M, double c, std::int64_t draws, Rng& rng) {
  const double cut = c / static_cast<double>(M);
  return count_uniform(M, draws, rng, tail_above_scaled_mean(M, c),
                       [&](const Eigen::VectorXd& x) { return x(0) > cut; });
}

McEstimate mc_band_tail(Index M, double a, std::int64_t draws, Rng& rng) {
  const double mean = 1.0 / static_cast<double>(M);
  return count_uniform(M, draws, rng, band_bound(M, a),
                       [&](const Eigen::VectorXd& x) { return std::abs(x(0) - mean) >= a; });
}

}  // namespace compinv
