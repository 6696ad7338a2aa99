#include "compinv/knn.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "compinv/errors.hpp"
#include "compinv/metrics.hpp"
#include "compinv/parallel.hpp"

namespace compinv {

KnnIndex::KnnIndex(Eigen::MatrixXd observations, Eigen::MatrixXd labels)
    : observations_(std::move(observations)), labels_(std::move(labels)) {
  if (observations_.rows() < 1) throw ValidationError("knn: empty training set");
  if (observations_.rows() != labels_.rows()) {
    throw ValidationError("knn: observation and label row counts differ");
  }
  if (!rows_on_simplex(labels_, 1e-9)) throw ValidationError("knn: labels must lie on the simplex");
}

KnnIndex KnnIndex::fit(const PairedDataset& data, const std::vector<Index>& visible) {
  if (data.size() < 1) throw ValidationError("knn: empty dataset");
  return KnnIndex(data.Y, normalized_truth_rows(data.X, visible));
}

void KnnIndex::check_k(Index k) const {
  if (k < 1 || k > size()) {
    throw ValidationError("knn: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(size()) + "]");
  }
}

std::vector<Neighbor> KnnIndex::nearest(const Eigen::VectorXd& y, Index k) const {
  check_k(k);
  if (y.size() != observation_dim()) throw ValidationError("knn: query dimension mismatch");

  // Column sweep keeps the accumulation contiguous for column-major storage.
  Eigen::VectorXd d = Eigen::VectorXd::Zero(size());
  for (Index j = 0; j < observation_dim(); ++j) {
    d.array() += (observations_.col(j).array() - y(j)).square();
  }

  std::vector<Neighbor> all(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) {
    all[static_cast<std::size_t>(i)] = {std::clamp(d(i), 0.0, kDistanceCap), i};
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  const auto kth = all.begin() + k;
  if (kth != all.end()) std::nth_element(all.begin(), kth - 1, all.end(), closer);
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end(), closer);
  return all;
}

Eigen::VectorXd KnnIndex::combine(const std::vector<Neighbor>& sorted, Index k) const {
  check_k(k);
  if (static_cast<Index>(sorted.size()) < k) throw ValidationError("knn: neighbor list too short");
  if (sorted.front().distance < kExactHit) return labels_.row(sorted.front().index).transpose();

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(label_dim());
  double total = 0.0;
  for (Index j = 0; j < k; ++j) {
    const auto& nb = sorted[static_cast<std::size_t>(j)];
    const double w = 1.0 / nb.distance;
    acc += w * labels_.row(nb.index).transpose();
    total += w;
  }
  acc /= total;
  if (acc.minCoeff() < -1e-12 || std::abs(acc.sum() - 1.0) > 1e-12) acc = project_to_simplex(acc);
  return acc;
}

Eigen::VectorXd KnnIndex::predict(const Eigen::VectorXd& y, Index k) const {
  return combine(nearest(y, k), k);
}

Eigen::MatrixXd KnnIndex::predict_rows(const Eigen::MatrixXd& Y, Index k, unsigned threads) const {
  check_k(k);
  Eigen::MatrixXd out(Y.rows(), label_dim());
  parallel_for(Y.rows(), threads, [&](long begin, long end) {
    for (long i = begin; i < end; ++i) out.row(i) = predict(Y.row(i).transpose(), k).transpose();
  });
  return out;
}

std::vector<KnnSweepPoint> sweep_k(const KnnIndex& index, const Eigen::MatrixXd& Y_test,
                                   const Eigen::MatrixXd& truth, const std::vector<Index>& ks,
                                   unsigned threads) {
  if (ks.empty()) throw ValidationError("sweep_k: empty k list");
  if (Y_test.rows() != truth.rows()) throw ValidationError("sweep_k: test rows mismatch");
  const Index k_max = *std::max_element(ks.begin(), ks.end());
  for (const Index k : ks) {
    if (k < 1 || k > index.size()) throw ValidationError("sweep_k: k out of range");
  }

  std::vector<Eigen::MatrixXd> estimates(ks.size(), Eigen::MatrixXd(Y_test.rows(), index.label_dim()));
  parallel_for(Y_test.rows(), threads, [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      const auto neighbors = index.nearest(Y_test.row(i).transpose(), k_max);
      for (std::size_t q = 0; q < ks.size(); ++q) {
        estimates[q].row(i) = index.combine(neighbors, ks[q]).transpose();
      }
    }
  });

  std::vector<KnnSweepPoint> curve;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    curve.push_back({ks[q], l2_error_percent(truth, estimates[q]), aad_percent(truth, estimates[q])});
  }
  return curve;
}

void write_sweep_csv(const std::vector<KnnSweepPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17) << "k,e_percent";
  const Index M = curve.empty() ? 0 : curve.front().aad_percent.size();
  for (Index j = 0; j < M; ++j) out << ",aad_" << (j + 1);
  out << '\n';
  for (const auto& p : curve) {
    out << p.k << ',' << p.e_percent;
    for (Index j = 0; j < M; ++j) out << ',' << p.aad_percent(j);
    out << '\n';
  }
}

}  // namespace compinv
