#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "compinv/random.hpp"
#include "compinv/simplex.hpp"
#include "compinv/systems.hpp"

namespace compinv {

/// Source of true compositions: uniform or mixture (both with optional caps), or the
/// end-members of the simplex.
class Sampler {
 public:
  enum class Kind { Uniform, Mixture, EndMembers };

  static Sampler uniform(Index M, std::vector<Index> capped = {}, double cap = 1.0);
  static Sampler mixture(MixtureSpec spec);
  /// Cycles through e_i for i not in `excluded`.
  static Sampler end_members(Index M, std::vector<Index> excluded = {});

  Kind kind() const noexcept { return kind_; }
  Index dimension() const noexcept { return spec_.dimension; }
  const MixtureSpec& spec() const noexcept { return spec_; }
  const std::vector<Index>& excluded() const noexcept { return excluded_; }
  std::string tag() const;

  /// Number of distinct end-members (EndMembers kind only).
  Index end_member_count() const;

  Eigen::MatrixXd draw(Index n, Rng& rng) const;

 private:
  Kind kind_ = Kind::Uniform;
  MixtureSpec spec_;
  std::vector<Index> excluded_;
};

/// s + N(0, sigma^2 I).
Eigen::VectorXd add_noise(const Eigen::VectorXd& s, double sigma, Rng& rng);
/// Row-wise noise for an n x L response matrix, drawn in row-major order.
Eigen::MatrixXd add_noise_rows(const Eigen::MatrixXd& S, double sigma, Rng& rng);

/// Aligned compositions X (n x M, full including obfuscating components) and noisy
/// observations Y (n x L).
struct PairedDataset {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string system_tag;
  std::string sampler_tag;

  Index size() const noexcept { return X.rows(); }
  /// Throws ValidationError if rows mismatch or any X row leaves the simplex.
  void validate() const;
  /// Subset of rows, in the given order.
  PairedDataset rows(const std::vector<Index>& idx) const;
};

/// Draws compositions from the sampler and observations through the system plus noise.
/// Compositions and noise come from separate sub-streams of `seed`.
PairedDataset generate_dataset(const ForwardSystem& sys, const Sampler& sampler, Index n,
                               double sigma, std::uint64_t seed);

/// Writes <stem>.json (metadata) plus <stem>_X.csv and <stem>_Y.csv with 17 significant
/// digits, enough for an exact double round trip.
void write_dataset(const PairedDataset& data, const std::filesystem::path& stem);
PairedDataset read_dataset(const std::filesystem::path& stem);

/// Plain CSV matrix IO (no header), 17 significant digits.
void write_matrix_csv(const Eigen::MatrixXd& A, const std::filesystem::path& path);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace compinv
