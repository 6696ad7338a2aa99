#include "compinv/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "compinv/errors.hpp"
#include "json.hpp"

namespace compinv {

Sampler Sampler::uniform(Index M, std::vector<Index> capped, double cap) {
  Sampler s;
  s.kind_ = Kind::Uniform;
  s.spec_ = MixtureSpec::uniform(M, std::move(capped), cap);
  s.spec_.validate();
  return s;
}

Sampler Sampler::mixture(MixtureSpec spec) {
  spec.validate();
  Sampler s;
  s.kind_ = Kind::Mixture;
  s.spec_ = std::move(spec);
  return s;
}

Sampler Sampler::end_members(Index M, std::vector<Index> excluded) {
  Sampler s;
  s.kind_ = Kind::EndMembers;
  s.spec_ = MixtureSpec::uniform(M);
  s.excluded_ = std::move(excluded);
  if (s.end_member_count() < 1) throw ValidationError("end_members: every vertex excluded");
  return s;
}

std::string Sampler::tag() const {
  switch (kind_) {
    case Kind::Uniform:
      return "uniform";
    case Kind::Mixture:
      return "mixture";
    case Kind::EndMembers:
      return "end-members";
  }
  return "unknown";
}

Index Sampler::end_member_count() const {
  Index count = 0;
  for (Index i = 0; i < spec_.dimension; ++i) {
    if (std::find(excluded_.begin(), excluded_.end(), i) == excluded_.end()) ++count;
  }
  return count;
}

Eigen::MatrixXd Sampler::draw(Index n, Rng& rng) const {
  switch (kind_) {
    case Kind::Uniform:
      if (spec_.obfuscating_indices.empty()) return sample_uniform_simplex(spec_.dimension, n, rng);
      return sample_mixture(spec_, n, rng);
    case Kind::Mixture:
      return sample_mixture(spec_, n, rng);
    case Kind::EndMembers: {
      std::vector<Index> vertices;
      for (Index i = 0; i < spec_.dimension; ++i) {
        if (std::find(excluded_.begin(), excluded_.end(), i) == excluded_.end()) {
          vertices.push_back(i);
        }
      }
      Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, spec_.dimension);
      for (Index r = 0; r < n; ++r) {
        X(r, vertices[static_cast<std::size_t>(r) % vertices.size()]) = 1.0;
      }
      return X;
    }
  }
  throw ValidationError("Sampler::draw: unhandled kind");
}

// ---------------------------------------------------------------------------

Eigen::VectorXd add_noise(const Eigen::VectorXd& s, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("add_noise: sigma must be >= 0");
  if (sigma == 0.0) return s;
  Eigen::VectorXd out = s;
  for (Index i = 0; i < out.size(); ++i) out(i) += sigma * rng.normal();
  return out;
}

Eigen::MatrixXd add_noise_rows(const Eigen::MatrixXd& S, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("add_noise: sigma must be >= 0");
  if (sigma == 0.0) return S;
  Eigen::MatrixXd out = S;
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) out(i, j) += sigma * rng.normal();
  }
  return out;
}

// ---------------------------------------------------------------------------

void PairedDataset::validate() const {
  if (X.rows() != Y.rows()) throw ValidationError("dataset: X and Y row counts differ");
  for (Index i = 0; i < X.rows(); ++i) {
    if (!is_on_simplex(X.row(i), 1e-9)) {
      throw ValidationError("dataset: row " + std::to_string(i) + " of X is off the simplex");
    }
  }
}

PairedDataset PairedDataset::rows(const std::vector<Index>& idx) const {
  PairedDataset out;
  out.X.resize(static_cast<Index>(idx.size()), X.cols());
  out.Y.resize(static_cast<Index>(idx.size()), Y.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.X.row(static_cast<Index>(r)) = X.row(idx[r]);
    out.Y.row(static_cast<Index>(r)) = Y.row(idx[r]);
  }
  out.sigma = sigma;
  out.seed = seed;
  out.system_tag = system_tag;
  out.sampler_tag = sampler_tag;
  return out;
}

PairedDataset generate_dataset(const ForwardSystem& sys, const Sampler& sampler, Index n,
                               double sigma, std::uint64_t seed) {
  if (n < 1) throw ValidationError("generate_dataset: n must be >= 1");
  if (sampler.dimension() != sys.input_dim()) {
    throw ValidationError("generate_dataset: sampler dimension does not match the system");
  }
  Rng composition_rng = Rng::substream(seed, "compositions");
  Rng noise_rng = Rng::substream(seed, "noise");

  PairedDataset data;
  data.X = sampler.draw(n, composition_rng);
  data.Y = add_noise_rows(sys.apply_rows(data.X), sigma, noise_rng);
  data.sigma = sigma;
  data.seed = seed;
  data.system_tag = sys.tag();
  data.sampler_tag = sampler.tag();
  return data;
}

// ---------------------------------------------------------------------------

void write_matrix_csv(const Eigen::MatrixXd& A, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      if (j) out << ',';
      out << A(i, j);
    }
    out << '\n';
  }
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("'" + path.string() + "': bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError("'" + path.string() + "': ragged rows");
    }
    rows.push_back(std::move(row));
  }
  const Index r = static_cast<Index>(rows.size());
  const Index c = r ? static_cast<Index>(rows.front().size()) : 0;
  Eigen::MatrixXd A(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) {
      A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return A;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
  return stem.parent_path() / (stem.filename().string() + suffix);
}

}  // namespace

void write_dataset(const PairedDataset& data, const std::filesystem::path& stem) {
  data.validate();
  nlohmann::json header = {
      {"format", "compinv-dataset-1"},
      {"rows", data.X.rows()},
      {"composition_dim", data.X.cols()},
      {"observation_dim", data.Y.cols()},
      {"sigma", data.sigma},
      {"seed", data.seed},
      {"system", data.system_tag},
      {"sampler", data.sampler_tag},
      {"X", with_suffix(stem, "_X.csv").filename().string()},
      {"Y", with_suffix(stem, "_Y.csv").filename().string()},
  };
  std::ofstream out(with_suffix(stem, ".json"));
  if (!out) throw ValidationError("cannot write dataset header for '" + stem.string() + "'");
  out << std::setw(2) << header << '\n';
  write_matrix_csv(data.X, with_suffix(stem, "_X.csv"));
  write_matrix_csv(data.Y, with_suffix(stem, "_Y.csv"));
}

PairedDataset read_dataset(const std::filesystem::path& stem) {
  std::ifstream in(with_suffix(stem, ".json"));
  if (!in) throw ValidationError("cannot open dataset header for '" + stem.string() + "'");
  nlohmann::json header;
  try {
    in >> header;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("dataset header: ") + e.what());
  }
  if (header.value("format", "") != "compinv-dataset-1") {
    throw ValidationError("dataset header: unsupported format");
  }
  PairedDataset data;
  const auto dir = stem.parent_path();
  data.X = read_matrix_csv(dir / header.at("X").get<std::string>());
  data.Y = read_matrix_csv(dir / header.at("Y").get<std::string>());
  data.sigma = header.at("sigma").get<double>();
  data.seed = header.at("seed").get<std::uint64_t>();
  data.system_tag = header.at("system").get<std::string>();
  data.sampler_tag = header.at("sampler").get<std::string>();
  if (data.X.rows() != header.at("rows").get<Index>()) {
    throw ValidationError("dataset: row count does not match header");
  }
  data.validate();
  return data;
}

}  // namespace compinv
