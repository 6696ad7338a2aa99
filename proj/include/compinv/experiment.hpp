#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "compinv/dataset.hpp"
#include "compinv/knn.hpp"
#include "compinv/metrics.hpp"
#include "compinv/mlp.hpp"
#include "compinv/systems.hpp"

namespace compinv::exp {

using json = nlohmann::json;

struct SystemConfig {
  /// One of the ForwardSystem kind tags.
  std::string kind = "linear";
  Index L = 5;
  /// Full unknown dimension, obfuscating components included.
  Index M = 3;
  /// seeded-gaussian | rbf-builtin | file | none (moving-peak kinds)
  std::string matrix_source = "seeded-gaussian";
  std::string matrix_file;
  double threshold = 0.02;
  double eps_log = 1e-10;
  double highdim_threshold = 0.03;
};

struct SamplerConfig {
  /// uniform | mixture
  std::string kind = "uniform";
  /// Components held below `cap` (draws above it are discarded).
  std::vector<Index> capped;
  double cap = 1.0;
  /// Mixture definition; only "highdim-reference" is built in.
  std::string mixture = "highdim-reference";
};

struct KnnConfig {
  bool enabled = false;
  Index k = 11;
  /// Non-empty: also sweep these k and report the best.
  std::vector<Index> sweep;
  /// Number of test rows used for kNN; 0 means all.
  Index n_test = 0;
};

struct MlpConfig {
  bool enabled = false;
  /// Empty means two layers of width_multiplier * M_v.
  std::vector<Index> hidden_widths;
  Index width_multiplier = 4;
  bool use_batchnorm = true;
  mlp::TrainingConfig training;
  bool save_checkpoint = false;
};

struct EstimatorsConfig {
  bool oracle = false;
  bool benchmark = false;
  KnnConfig knn;
  MlpConfig mlp;
};

struct VolumeConfig {
  std::vector<Index> dims{2, 3, 5, 7, 10, 15};
  std::vector<double> thresholds{0.7, 0.8, 0.9, 0.99};
  std::vector<double> c_values{1.0, 2.0, 3.0};
  std::int64_t draws = 1000000;
};

/// One reproducible experiment: system, sampler, data sizes, estimators and evaluation.
struct ExperimentPreset {
  std::string name;
  std::string description;
  /// estimation | volume-mc
  std::string task = "estimation";
  SystemConfig system;
  SamplerConfig sampler;
  Index n_train = 10000;
  Index n_test = 10000;
  double sigma = 0.005;
  /// standard | obfuscated-normalized | end-member-stress
  std::string evaluation = "standard";
  EstimatorsConfig estimators;
  VolumeConfig volume;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Registry and configuration

/// All built-in presets in catalog order.
const std::vector<ExperimentPreset>& presets();
/// Throws ValidationError naming the preset when it is not registered.
const ExperimentPreset& find_preset(const std::string& name);
void list_presets(std::ostream& os);

/// Strict parse: unknown keys and wrong types are rejected with the offending path.
ExperimentPreset parse_preset(const json& doc);
ExperimentPreset parse_config(const std::filesystem::path& path);
/// Canonical form: every field present, keys sorted.
json to_json(const ExperimentPreset& preset);

/// Applies dotted-path key=value overrides ("estimators.mlp.training.max_epochs=50").
/// Values are read as JSON when they parse, otherwise as strings. Unknown keys throw.
ExperimentPreset apply_overrides(const ExperimentPreset& preset,
                                 const std::vector<std::string>& overrides);

/// Builds the forward system of a config; seeded matrices come from the "matrix" stream.
ForwardSystem build_system(const SystemConfig& config, std::uint64_t seed);
Sampler build_sampler(const SamplerConfig& config, Index M);

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out_dir;
  /// Single-threaded, with wall times written as 0 to the report.
  bool deterministic = false;
  /// Print the summary table here when set.
  std::ostream* log = nullptr;
};

struct VolumeRow {
  Index M = 0;
  /// first-above | corner | tail
  std::string quantity;
  /// T for first-above, epsilon for corner, c for tail.
  double parameter = 0.0;
  McEstimate estimate;
};

struct ExperimentReport {
  std::string preset;
  std::uint64_t seed = 0;
  std::string system;
  std::string sampler;
  std::vector<ErrorSummary> estimators;
  std::vector<KnnSweepPoint> knn_sweep;
  std::vector<VolumeRow> volume;
  json diagnostics = json::object();
  json config = json::object();

  /// nullptr when absent.
  const ErrorSummary* find(const std::string& tag) const;
  json to_json(bool include_timings = true) const;
};

ExperimentReport run(const ExperimentPreset& preset, const RunOptions& options);
ExperimentReport run(const std::string& preset_name, const RunOptions& options,
                     const std::vector<std::string>& overrides = {});

/// Volume-concentration grid against its closed forms.
std::vector<VolumeRow> volume_mc(const VolumeConfig& config, std::uint64_t seed);
void write_volume_csv(const std::vector<VolumeRow>& rows, const std::filesystem::path& path);

/// Closed-form quantities for one system: singular values, condition number, oracle bound,
/// thresholding floor and obfuscation bounds where they apply.
json system_bounds(const SystemConfig& config, double sigma, std::uint64_t seed);

}  // namespace compinv::exp
