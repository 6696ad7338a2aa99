#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

#include "compinv/dataset.hpp"
#include "compinv/simplex.hpp"

namespace compinv {

struct Neighbor {
  double distance = 0.0;  // squared Euclidean, clamped to [0, 1e10]
  Index index = 0;
};

/// Brute-force inverse-distance-weighted k-nearest-neighbor estimator.
///
/// Weights are 1/d with d the squared Euclidean distance. A query within 1e-300 of a
/// training observation returns that observation's label. Ties at equal distance go to
/// the smaller training index.
class KnnIndex {
 public:
  static constexpr double kDistanceCap = 1e10;
  static constexpr double kExactHit = 1e-300;

  /// observations: n x L; labels: n x M_v, every row on the simplex.
  KnnIndex(Eigen::MatrixXd observations, Eigen::MatrixXd labels);

  /// Labels are the normalized visible part of the dataset compositions.
  static KnnIndex fit(const PairedDataset& data, const std::vector<Index>& visible);

  Index size() const noexcept { return observations_.rows(); }
  Index observation_dim() const noexcept { return observations_.cols(); }
  Index label_dim() const noexcept { return labels_.cols(); }

  /// The k nearest training rows, sorted by (distance, index).
  std::vector<Neighbor> nearest(const Eigen::VectorXd& y, Index k) const;

  Eigen::VectorXd predict(const Eigen::VectorXd& y, Index k) const;
  Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& Y, Index k, unsigned threads = 1) const;

  /// Estimate from an already-sorted neighbor list, using its first k entries.
  Eigen::VectorXd combine(const std::vector<Neighbor>& sorted, Index k) const;

 private:
  void check_k(Index k) const;

  Eigen::MatrixXd observations_;
  Eigen::MatrixXd labels_;
};

struct KnnSweepPoint {
  Index k = 0;
  double e_percent = 0.0;
  Eigen::VectorXd aad_percent;
};

/// Test error for each k; neighbors are searched once per query at the largest k.
std::vector<KnnSweepPoint> sweep_k(const KnnIndex& index, const Eigen::MatrixXd& Y_test,
                                   const Eigen::MatrixXd& truth, const std::vector<Index>& ks,
                                   unsigned threads = 1);

/// Columns: k, e_percent, aad_1..aad_M.
void write_sweep_csv(const std::vector<KnnSweepPoint>& curve, const std::filesystem::path& path);

}  // namespace compinv
