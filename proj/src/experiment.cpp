#include "compinv/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "compinv/errors.hpp"
#include "compinv/linear_inverse.hpp"
#include "compinv/parallel.hpp"

namespace compinv::exp {

namespace {

const std::set<std::string> kTasks{"estimation", "volume-mc"};
const std::set<std::string> kEvaluations{"standard", "obfuscated-normalized", "end-member-stress"};
const std::set<std::string> kMatrixSources{"seeded-gaussian", "rbf-builtin", "file", "none"};
const std::set<std::string> kSamplerKinds{"uniform", "mixture"};

/// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    check_type(v, out, key);
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ValidationError(where(key) + ": wrong type");
    }
  }

  /// nullptr when the key is absent.
  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string where(const std::string& key = "") const {
    const std::string base = path_.empty() ? std::string("config") : path_;
    return key.empty() ? base : base + "." + key;
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ValidationError("unknown key '" + where(item.key()) + "'");
    }
  }

 private:
  template <typename T>
  void check_type(const json& v, const T&, const char* key) const {
    bool ok = true;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
      ok = v.is_array() &&
           std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); });
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); });
    }
    if (!ok) throw ValidationError(where(key) + ": wrong type");
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string schedule_tag(mlp::DecaySchedule s) {
  return s == mlp::DecaySchedule::PerStep ? "per-step" : "per-epoch";
}

mlp::DecaySchedule schedule_from(const std::string& tag, const std::string& where) {
  if (tag == "per-step") return mlp::DecaySchedule::PerStep;
  if (tag == "per-epoch") return mlp::DecaySchedule::PerEpoch;
  throw ValidationError(where + ": expected per-step or per-epoch, got '" + tag + "'");
}

void require_in(const std::set<std::string>& allowed, const std::string& value,
                const std::string& where) {
  if (!allowed.count(value)) throw ValidationError(where + ": unsupported value '" + value + "'");
}

SystemConfig parse_system(const json& j, const std::string& path) {
  SystemConfig c;
  Reader r(j, path);
  r.read("kind", c.kind);
  r.read("L", c.L);
  r.read("M", c.M);
  r.read("matrix_source", c.matrix_source);
  r.read("matrix_file", c.matrix_file);
  r.read("threshold", c.threshold);
  r.read("eps_log", c.eps_log);
  r.read("highdim_threshold", c.highdim_threshold);
  r.finish();
  system_kind_from_string(c.kind);
  require_in(kMatrixSources, c.matrix_source, r.where("matrix_source"));
  return c;
}

SamplerConfig parse_sampler(const json& j, const std::string& path) {
  SamplerConfig c;
  Reader r(j, path);
  r.read("kind", c.kind);
  r.read("capped", c.capped);
  r.read("cap", c.cap);
  r.read("mixture", c.mixture);
  r.finish();
  require_in(kSamplerKinds, c.kind, r.where("kind"));
  return c;
}

mlp::TrainingConfig parse_training(const json& j, const std::string& path) {
  mlp::TrainingConfig c;
  Reader r(j, path);
  std::string schedule = schedule_tag(c.decay_schedule);
  r.read("learning_rate", c.learning_rate);
  r.read("batch_size", c.batch_size);
  r.read("beta1", c.beta1);
  r.read("beta2", c.beta2);
  r.read("decay", c.decay);
  r.read("decay_schedule", schedule);
  r.read("max_epochs", c.max_epochs);
  r.read("validation_fraction", c.validation_fraction);
  r.read("regenerate_every", c.regenerate_every);
  r.finish();
  c.decay_schedule = schedule_from(schedule, r.where("decay_schedule"));
  return c;
}

EstimatorsConfig parse_estimators(const json& j, const std::string& path) {
  EstimatorsConfig c;
  Reader r(j, path);
  r.read("oracle", c.oracle);
  r.read("benchmark", c.benchmark);
  if (const json* k = r.child("knn")) {
    Reader rk(*k, r.path("knn"));
    rk.read("enabled", c.knn.enabled);
    rk.read("k", c.knn.k);
    rk.read("sweep", c.knn.sweep);
    rk.read("n_test", c.knn.n_test);
    rk.finish();
  }
  if (const json* m = r.child("mlp")) {
    const std::string mp = r.path("mlp");
    Reader rm(*m, mp);
    rm.read("enabled", c.mlp.enabled);
    rm.read("hidden_widths", c.mlp.hidden_widths);
    rm.read("width_multiplier", c.mlp.width_multiplier);
    rm.read("use_batchnorm", c.mlp.use_batchnorm);
    rm.read("save_checkpoint", c.mlp.save_checkpoint);
    if (const json* t = rm.child("training")) c.mlp.training = parse_training(*t, rm.path("training"));
    rm.finish();
  }
  r.finish();
  return c;
}

VolumeConfig parse_volume(const json& j, const std::string& path) {
  VolumeConfig c;
  Reader r(j, path);
  r.read("dims", c.dims);
  r.read("thresholds", c.thresholds);
  r.read("c_values", c.c_values);
  r.read("draws", c.draws);
  r.finish();
  return c;
}

json training_json(const mlp::TrainingConfig& t) {
  return {{"learning_rate", t.learning_rate},     {"batch_size", t.batch_size},
          {"beta1", t.beta1},                     {"beta2", t.beta2},
          {"decay", t.decay},                     {"decay_schedule", schedule_tag(t.decay_schedule)},
          {"max_epochs", t.max_epochs},           {"validation_fraction", t.validation_fraction},
          {"regenerate_every", t.regenerate_every}};
}

// ---------------------------------------------------------------------------
// Built-in presets

ExperimentPreset lowdim(std::string name, std::string description, std::string kind, Index M = 3) {
  ExperimentPreset p;
  p.name = std::move(name);
  p.description = std::move(description);
  p.system.kind = std::move(kind);
  p.system.L = 5;
  p.system.M = M;
  p.n_train = 10000;
  p.n_test = 10000;
  p.sigma = 0.005;
  p.estimators.oracle = true;
  p.estimators.benchmark = true;
  p.estimators.mlp.enabled = true;
  auto& t = p.estimators.mlp.training;
  t.learning_rate = 1e-3;
  // batch statistics from small batches cap the attainable precision at L=5
  t.batch_size = 512;
  t.decay = 0.001;
  t.max_epochs = 2000;
  t.decay_schedule = mlp::DecaySchedule::PerEpoch;
  return p;
}

ExperimentPreset highdim(std::string name, std::string description, std::string kind) {
  ExperimentPreset p;
  p.name = std::move(name);
  p.description = std::move(description);
  p.system.kind = std::move(kind);
  p.system.L = 1000;
  p.system.M = 20;
  p.system.matrix_source = "rbf-builtin";
  p.n_train = 10000;
  p.n_test = 10000;
  p.sigma = 0.005;
  p.estimators.mlp.enabled = true;
  auto& t = p.estimators.mlp.training;
  t.learning_rate = 1e-3;
  t.batch_size = 64;
  t.max_epochs = 300;
  t.regenerate_every = 100;
  t.decay_schedule = mlp::DecaySchedule::PerEpoch;
  return p;
}

std::vector<ExperimentPreset> build_registry() {
  std::vector<ExperimentPreset> out;

  out.push_back(lowdim("lin_lowdim", "linear system, L=5, M=3, Gaussian H", "linear"));
  out.push_back(lowdim("nonlin_invertible", "invertible transform g then Gaussian H", "invertible-g"));
  out.push_back(lowdim("nonlin_noninvertible", "g with thresholded third component (T=0.02)",
                       "noninvertible-g"));

  auto obf = [](std::string name, std::string description, std::string kind) {
    ExperimentPreset p = lowdim(std::move(name), std::move(description), std::move(kind), 4);
    p.sampler.capped = {3};
    p.sampler.cap = 0.2;
    p.evaluation = "obfuscated-normalized";
    return p;
  };
  out.push_back(obf("nonlin_obf_inv", "invertible g plus an obfuscating fourth component (m4 <= 0.2)",
                    "obfuscated-invertible"));
  out.push_back(obf("nonlin_obf_noninv", "thresholded g plus an obfuscating fourth component",
                    "obfuscated-noninvertible"));

  auto ann_only = [](ExperimentPreset p) {
    p.estimators.oracle = false;
    p.estimators.benchmark = false;
    return p;
  };
  out.push_back(ann_only(lowdim("nonlin_scaled_mag", "response ||Hm||^2 Hm", "scaled-magnitude")));
  out.push_back(ann_only(lowdim("nonlin_corr", "H applied to correlated terms of m", "correlated")));
  {
    ExperimentPreset p = ann_only(lowdim("nonlin_peak", "moving peaks with magnitudes set by m",
                                         "moving-peak"));
    p.system.matrix_source = "none";
    out.push_back(p);
  }
  {
    ExperimentPreset p = ann_only(lowdim("nonlin_peak_corr", "moving peaks driven by correlated terms",
                                         "moving-peak-correlated"));
    p.system.matrix_source = "none";
    out.push_back(p);
  }

  {
    ExperimentPreset p = highdim("lin_highdim", "nonnegative RBF system, L=1000, M=20", "highdim-linear");
    p.estimators.oracle = true;
    p.estimators.benchmark = true;
    out.push_back(p);
  }
  {
    ExperimentPreset p = highdim("lin_highdim_endmember",
                                 "RBF system; adds a test on the 20 end-members", "highdim-linear");
    p.estimators.oracle = true;
    p.estimators.benchmark = true;
    p.evaluation = "end-member-stress";
    out.push_back(p);
  }

  auto nonlin_hd = [&](std::string name, std::string description, std::string kind) {
    ExperimentPreset p = highdim(std::move(name), std::move(description), std::move(kind));
    p.sampler.capped = {18, 19};
    p.sampler.cap = 0.05;
    p.evaluation = "obfuscated-normalized";
    p.estimators.knn.enabled = true;
    p.estimators.knn.n_test = 1000;
    p.estimators.knn.sweep = {1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31};
    return p;
  };
  out.push_back(nonlin_hd("nonlin_highdim_uniform", "nonlinear RBF system, uniform samples, 2 obfuscating",
                          "highdim-nonlinear"));
  {
    ExperimentPreset p = nonlin_hd("nonlin_highdim_mixture", "nonlinear RBF system, 3-center mixture",
                                   "highdim-nonlinear");
    p.sampler.kind = "mixture";
    p.estimators.mlp.width_multiplier = 32;
    out.push_back(p);
  }
  out.push_back(nonlin_hd("nonlin_highdim_maxnorm", "nonlinear RBF system divided by its max",
                          "highdim-nonlinear-maxnorm"));
  out.push_back(nonlin_hd("nonlin_highdim_l2norm", "nonlinear RBF system divided by its l2 norm",
                          "highdim-nonlinear-l2norm"));

  const std::vector<Index> sweep{1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31};
  {
    ExperimentPreset p;
    p.name = "knn_sweep_lowdim";
    p.description = "kNN k-sweep, linear L=7, M=5";
    p.system.kind = "linear";
    p.system.L = 7;
    p.system.M = 5;
    p.n_train = 10000;
    p.n_test = 1000;
    p.estimators.knn.enabled = true;
    p.estimators.knn.sweep = sweep;
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "knn_sweep_highdim";
    p.description = "kNN k-sweep, RBF linear system L=1000, M=20";
    p.system.kind = "highdim-linear";
    p.system.L = 1000;
    p.system.M = 20;
    p.system.matrix_source = "rbf-builtin";
    p.n_train = 10000;
    p.n_test = 1000;
    p.estimators.knn.enabled = true;
    p.estimators.knn.sweep = sweep;
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "volume_mc";
    p.description = "uniform-simplex volume concentration against closed forms";
    p.task = "volume-mc";
    p.system.matrix_source = "none";
    out.push_back(p);
  }
  for (const auto& p : out) p.validate();
  return out;
}

// ---------------------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Rows 0..n-1 of a dataset.
PairedDataset head(const PairedDataset& data, Index n) {
  if (n <= 0 || n >= data.size()) return data;
  PairedDataset out = data;
  out.X = data.X.topRows(n);
  out.Y = data.Y.topRows(n);
  return out;
}

void print_summary(std::ostream& os, const ExperimentReport& report, bool deterministic) {
  os << "preset " << report.preset << "  seed " << report.seed << "  system " << report.system
     << "  sampler " << report.sampler << '\n';
  os << std::left << std::setw(26) << "estimator" << std::right << std::setw(12) << "e_percent"
     << std::setw(12) << "aad_mean" << std::setw(12) << "bound" << std::setw(10) << "time_s" << '\n';
  os << std::fixed;
  for (const auto& e : report.estimators) {
    os << std::left << std::setw(26) << e.estimator_tag << std::right << std::setprecision(4)
       << std::setw(12) << e.e_percent << std::setw(12) << e.aad_mean_percent << std::setw(12);
    if (e.bound_percent)
      os << *e.bound_percent;
    else
      os << "-";
    os << std::setprecision(2) << std::setw(10) << (deterministic ? 0.0 : e.wall_time_s) << '\n';
  }
  os.unsetf(std::ios::fixed);
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentPreset::validate() const {
  if (name.empty()) throw ValidationError("preset name must not be empty");
  require_in(kTasks, task, "task");
  require_in(kEvaluations, evaluation, "evaluation");
  require_in(kMatrixSources, system.matrix_source, "system.matrix_source");
  require_in(kSamplerKinds, sampler.kind, "sampler.kind");
  if (task == "volume-mc") {
    if (volume.dims.empty()) throw ValidationError("volume.dims must not be empty");
    for (Index M : volume.dims)
      if (M < 2) throw ValidationError("volume.dims entries must be >= 2");
    for (double T : volume.thresholds)
      if (!(T > 0.0 && T < 1.0)) throw ValidationError("volume.thresholds must lie in (0,1)");
    if (volume.draws < 1) throw ValidationError("volume.draws must be >= 1");
    return;
  }
  system_kind_from_string(system.kind);
  if (system.L < 1 || system.M < 1) throw ValidationError("system.L and system.M must be >= 1");
  if (n_train < 1 || n_test < 1) throw ValidationError("n_train and n_test must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
  if (!(sampler.cap > 0.0 && sampler.cap <= 1.0)) throw ValidationError("sampler.cap must lie in (0,1]");
  for (Index i : sampler.capped)
    if (i < 0 || i >= system.M) throw ValidationError("sampler.capped index out of range");
  const auto& e = estimators;
  if (!e.oracle && !e.benchmark && !e.knn.enabled && !e.mlp.enabled)
    throw ValidationError("preset enables no estimator");
  if (e.knn.enabled) {
    if (e.knn.k < 1) throw ValidationError("estimators.knn.k must be >= 1");
    for (Index k : e.knn.sweep)
      if (k < 1) throw ValidationError("estimators.knn.sweep entries must be >= 1");
    if (e.knn.n_test < 0) throw ValidationError("estimators.knn.n_test must be >= 0");
  }
  if (e.mlp.enabled) {
    e.mlp.training.validate();
    if (e.mlp.width_multiplier < 1) throw ValidationError("estimators.mlp.width_multiplier must be >= 1");
    for (Index w : e.mlp.hidden_widths)
      if (w < 1) throw ValidationError("estimators.mlp.hidden_widths entries must be >= 1");
  }
}

const std::vector<ExperimentPreset>& presets() {
  static const std::vector<ExperimentPreset> registry = build_registry();
  return registry;
}

const ExperimentPreset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw ValidationError("unknown preset '" + name + "'");
}

void list_presets(std::ostream& os) {
  std::size_t width = 0;
  for (const auto& p : presets()) width = std::max(width, p.name.size());
  for (const auto& p : presets())
    os << std::left << std::setw(static_cast<int>(width + 2)) << p.name << p.description << '\n';
}

ExperimentPreset parse_preset(const json& doc) {
  ExperimentPreset p;
  Reader r(doc, "");
  r.read("name", p.name);
  r.read("description", p.description);
  r.read("task", p.task);
  if (const json* s = r.child("system")) p.system = parse_system(*s, "system");
  if (const json* s = r.child("sampler")) p.sampler = parse_sampler(*s, "sampler");
  r.read("n_train", p.n_train);
  r.read("n_test", p.n_test);
  r.read("sigma", p.sigma);
  r.read("evaluation", p.evaluation);
  if (const json* e = r.child("estimators")) p.estimators = parse_estimators(*e, "estimators");
  if (const json* v = r.child("volume")) p.volume = parse_volume(*v, "volume");
  r.finish();
  p.validate();
  return p;
}

ExperimentPreset parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return parse_preset(doc);
}

json to_json(const ExperimentPreset& p) {
  const auto& s = p.system;
  const auto& e = p.estimators;
  return {
      {"name", p.name},
      {"description", p.description},
      {"task", p.task},
      {"system",
       {{"kind", s.kind},
        {"L", s.L},
        {"M", s.M},
        {"matrix_source", s.matrix_source},
        {"matrix_file", s.matrix_file},
        {"threshold", s.threshold},
        {"eps_log", s.eps_log},
        {"highdim_threshold", s.highdim_threshold}}},
      {"sampler",
       {{"kind", p.sampler.kind},
        {"capped", p.sampler.capped},
        {"cap", p.sampler.cap},
        {"mixture", p.sampler.mixture}}},
      {"n_train", p.n_train},
      {"n_test", p.n_test},
      {"sigma", p.sigma},
      {"evaluation", p.evaluation},
      {"estimators",
       {{"oracle", e.oracle},
        {"benchmark", e.benchmark},
        {"knn", {{"enabled", e.knn.enabled}, {"k", e.knn.k}, {"sweep", e.knn.sweep}, {"n_test", e.knn.n_test}}},
        {"mlp",
         {{"enabled", e.mlp.enabled},
          {"hidden_widths", e.mlp.hidden_widths},
          {"width_multiplier", e.mlp.width_multiplier},
          {"use_batchnorm", e.mlp.use_batchnorm},
          {"save_checkpoint", e.mlp.save_checkpoint},
          {"training", training_json(e.mlp.training)}}}}},
      {"volume",
       {{"dims", p.volume.dims},
        {"thresholds", p.volume.thresholds},
        {"c_values", p.volume.c_values},
        {"draws", p.volume.draws}}},
  };
}

ExperimentPreset apply_overrides(const ExperimentPreset& preset,
                                 const std::vector<std::string>& overrides) {
  if (overrides.empty()) return preset;
  json doc = to_json(preset);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("override '" + item + "' is not of the form key=value");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json* node = &doc;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
      if (!node->is_object() || !node->contains(part))
        throw ValidationError("unknown override key '" + key + "'");
      node = &(*node)[part];
    }
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    // keep "1e4"-style counts usable for integer fields
    if (node->is_number_integer() && value.is_number_float() &&
        value.get<double>() == std::floor(value.get<double>()))
      value = static_cast<std::int64_t>(value.get<double>());
    *node = value;
  }
  return parse_preset(doc);
}

ForwardSystem build_system(const SystemConfig& c, std::uint64_t seed) {
  const SystemKind kind = system_kind_from_string(c.kind);
  SystemParams params;
  params.threshold = c.threshold;
  params.eps_log = c.eps_log;
  params.highdim_threshold = c.highdim_threshold;

  Index cols = c.M;
  switch (kind) {
    case SystemKind::InvertibleG:
    case SystemKind::NoninvertibleG:
      cols = 3;
      break;
    case SystemKind::ObfuscatedInvertible:
    case SystemKind::ObfuscatedNoninvertible:
      cols = 4;
      break;
    case SystemKind::Correlated:
      cols = 5;
      break;
    default:
      break;
  }

  Eigen::MatrixXd H;
  if (c.matrix_source == "seeded-gaussian") {
    Rng rng = Rng::substream(seed, "matrix");
    H = build_gaussian_matrix(c.L, cols, rng);
  } else if (c.matrix_source == "rbf-builtin") {
    H = build_rbf_matrix(c.L);
  } else if (c.matrix_source == "file") {
    H = read_matrix_csv(c.matrix_file);
  } else if (kind != SystemKind::MovingPeak && kind != SystemKind::MovingPeakCorrelated) {
    throw ValidationError("system kind '" + c.kind + "' needs a matrix source");
  }

  ForwardSystem sys = [&] {
    switch (kind) {
      case SystemKind::Linear: return ForwardSystem::linear(H);
      case SystemKind::InvertibleG: return ForwardSystem::invertible_g(H);
      case SystemKind::NoninvertibleG: return ForwardSystem::noninvertible_g(H, params);
      case SystemKind::ObfuscatedInvertible: return ForwardSystem::obfuscated_invertible(H);
      case SystemKind::ObfuscatedNoninvertible: return ForwardSystem::obfuscated_noninvertible(H, params);
      case SystemKind::ScaledMagnitude: return ForwardSystem::scaled_magnitude(H);
      case SystemKind::Correlated: return ForwardSystem::correlated(H);
      case SystemKind::MovingPeak: return ForwardSystem::moving_peak(c.L);
      case SystemKind::MovingPeakCorrelated: return ForwardSystem::moving_peak_correlated(c.L);
      case SystemKind::HighdimLinear: return ForwardSystem::highdim_linear(H);
      default: return ForwardSystem::highdim_nonlinear(H, kind, params);
    }
  }();
  if (sys.input_dim() != c.M)
    throw ValidationError("system.M = " + std::to_string(c.M) + " but kind '" + c.kind + "' has M = " +
                          std::to_string(sys.input_dim()));
  if (sys.observation_dim() != c.L)
    throw ValidationError("system.L = " + std::to_string(c.L) + " but the matrix has " +
                          std::to_string(sys.observation_dim()) + " rows");
  return sys;
}

Sampler build_sampler(const SamplerConfig& c, Index M) {
  if (c.kind == "uniform") return Sampler::uniform(M, c.capped, c.cap);
  if (c.mixture != "highdim-reference")
    throw ValidationError("sampler.mixture: unknown mixture '" + c.mixture + "'");
  MixtureSpec spec = MixtureSpec::highdim_reference();
  if (spec.dimension != M) throw ValidationError("sampler.mixture: reference mixture needs M = 20");
  if (!c.capped.empty()) {
    spec.obfuscating_indices = c.capped;
    spec.obfuscation_cap = c.cap;
  }
  return Sampler::mixture(spec);
}

// ---------------------------------------------------------------------------

const ErrorSummary* ExperimentReport::find(const std::string& tag) const {
  for (const auto& e : estimators)
    if (e.estimator_tag == tag) return &e;
  return nullptr;
}

json ExperimentReport::to_json(bool include_timings) const {
  json est = json::array();
  for (const auto& e : estimators) {
    json j{{"tag", e.estimator_tag},
           {"e_percent", e.e_percent},
           {"aad_percent", vector_json(e.aad_percent)},
           {"aad_mean_percent", e.aad_mean_percent},
           {"n", e.n},
           {"wall_time_s", include_timings ? e.wall_time_s : 0.0}};
    if (e.bound_percent) j["bound_percent"] = *e.bound_percent;
    est.push_back(std::move(j));
  }
  json doc{{"preset", preset},   {"seed", seed},          {"system", system},
           {"sampler", sampler}, {"estimators", est},     {"diagnostics", diagnostics},
           {"config", config}};
  if (!knn_sweep.empty()) {
    json sweep = json::array();
    for (const auto& p : knn_sweep)
      sweep.push_back({{"k", p.k}, {"e_percent", p.e_percent}, {"aad_percent", vector_json(p.aad_percent)}});
    doc["knn_sweep"] = sweep;
  }
  if (!volume.empty()) {
    json rows = json::array();
    for (const auto& v : volume)
      rows.push_back({{"M", v.M},
                      {"quantity", v.quantity},
                      {"parameter", v.parameter},
                      {"closed_form", v.estimate.closed_form},
                      {"mc_estimate", v.estimate.estimate},
                      {"mc_stderr", v.estimate.standard_error},
                      {"hits", v.estimate.hits},
                      {"draws", v.estimate.draws}});
    doc["volume_mc"] = rows;
  }
  return doc;
}

std::vector<VolumeRow> volume_mc(const VolumeConfig& config, std::uint64_t seed) {
  std::vector<VolumeRow> rows;
  for (Index M : config.dims) {
    for (double T : config.thresholds) {
      Rng rng = Rng::substream(seed, "volume-first-" + std::to_string(M) + "-" + std::to_string(T));
      rows.push_back({M, "first-above", T, mc_first_component_above(M, T, config.draws, rng)});
    }
    for (double T : config.thresholds) {
      const double eps = 1.0 - T;
      if (eps > 0.5) continue;  // corner regions overlap; closed form only counts disjoint corners
      Rng rng = Rng::substream(seed, "volume-corner-" + std::to_string(M) + "-" + std::to_string(T));
      rows.push_back({M, "corner", eps, mc_corner_mass(M, eps, config.draws, rng)});
    }
    for (double c : config.c_values) {
      if (c > static_cast<double>(M)) continue;
      Rng rng = Rng::substream(seed, "volume-tail-" + std::to_string(M) + "-" + std::to_string(c));
      rows.push_back({M, "tail", c, mc_tail_above_scaled_mean(M, c, config.draws, rng)});
    }
  }
  return rows;
}

void write_volume_csv(const std::vector<VolumeRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "M,quantity,parameter,closed_form,mc_estimate,mc_stderr,hits,draws\n";
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << r.M << ',' << r.quantity << ',' << r.parameter << ',' << r.estimate.closed_form << ','
        << r.estimate.estimate << ',' << r.estimate.standard_error << ',' << r.estimate.hits << ','
        << r.estimate.draws << '\n';
}

json system_bounds(const SystemConfig& config, double sigma, std::uint64_t seed) {
  const ForwardSystem sys = build_system(config, seed);
  json out{{"system", sys.tag()}, {"L", sys.observation_dim()}, {"M", sys.input_dim()},
           {"visible_dim", sys.visible_dim()}, {"sigma", sigma}};
  if (sys.has_linear_core()) {
    const Eigen::MatrixXd H = sys.linear_core();
    out["singular_values"] = vector_json(singular_values(H));
    out["condition_number"] = condition_number(H);
    out["d_oracle_uc_percent"] = unconstrained_oracle_error(H, sigma);
    if (!sys.obfuscating_indices().empty()) {
      const Eigen::MatrixXd H1 = sys.matrix().rightCols(static_cast<Index>(sys.obfuscating_indices().size()));
      const double cap = 0.2;
      const ObfuscatedBound ob = obfuscated_error_bound(H, H1, cap, sigma);
      const MyopicResidual mr = myopic_residual_bound(H, H1, cap, sigma);
      out["obfuscated_bound"] = {{"m1_l1", cap},
                                 {"oracle_term", ob.oracle_term},
                                 {"obfuscating_term", ob.obfuscating_term},
                                 {"bound", ob.bound}};
      out["myopic_residual"] = {{"m1_l1", cap},
                                {"noise_term", mr.noise_term},
                                {"first_power_bound", mr.first_power_bound},
                                {"note", "printed first-power form; likely a typo for the squared term"}};
    }
  }
  if (sys.kind() == SystemKind::NoninvertibleG || sys.kind() == SystemKind::ObfuscatedNoninvertible) {
    const ThresholdingFloor f = thresholding_floor(sys.params().threshold);
    out["thresholding_floor"] = {{"T", sys.params().threshold}, {"estimate", f.estimate},
                                 {"loss_percent", 100.0 * f.loss}};
  }
  return out;
}

// ---------------------------------------------------------------------------

ExperimentReport run(const std::string& preset_name, const RunOptions& options,
                     const std::vector<std::string>& overrides) {
  return run(apply_overrides(find_preset(preset_name), overrides), options);
}

ExperimentReport run(const ExperimentPreset& preset, const RunOptions& options) {
  preset.validate();
  const std::uint64_t seed = options.seed;
  const unsigned threads = options.deterministic ? 1u : default_threads();
  const auto& out_dir = options.out_dir;
  if (out_dir) std::filesystem::create_directories(*out_dir);

  ExperimentReport report;
  report.preset = preset.name;
  report.seed = seed;
  report.config = to_json(preset);
  std::vector<std::pair<std::string, double>> timings;

  if (preset.task == "volume-mc") {
    const auto start = Clock::now();
    report.system = "none";
    report.sampler = "uniform";
    report.volume = volume_mc(preset.volume, seed);
    timings.emplace_back("volume-mc", seconds_since(start));
    bool all_agree = true;
    for (const auto& r : report.volume) all_agree = all_agree && r.estimate.agrees(3.0);
    report.diagnostics["all_within_3_se"] = all_agree;
    if (out_dir) write_volume_csv(report.volume, *out_dir / "volume_mc.csv");
  } else {
    const ForwardSystem sys = build_system(preset.system, seed);
    const Sampler sampler = build_sampler(preset.sampler, sys.input_dim());
    const std::vector<Index> visible = sys.visible_indices();
    if (!sys.obfuscating_indices().empty() && preset.evaluation == "standard")
      throw ValidationError("system '" + sys.tag() + "' has obfuscating components; use evaluation "
                            "obfuscated-normalized");
    report.system = sys.tag();
    report.sampler = sampler.tag();
    auto& diag = report.diagnostics;

    auto start = Clock::now();
    const PairedDataset train =
        generate_dataset(sys, sampler, preset.n_train, preset.sigma, derive_seed(seed, "train-data"));
    const PairedDataset test =
        generate_dataset(sys, sampler, preset.n_test, preset.sigma, derive_seed(seed, "test-data"));
    timings.emplace_back("data", seconds_since(start));
    const Eigen::MatrixXd truth = normalized_truth_rows(test.X, visible);
    const Eigen::MatrixXd train_truth = normalized_truth_rows(train.X, visible);

    std::optional<PairedDataset> em;
    Eigen::MatrixXd em_truth;
    if (preset.evaluation == "end-member-stress") {
      const Sampler ends = Sampler::end_members(sys.input_dim(), sys.obfuscating_indices());
      em = generate_dataset(sys, ends, ends.end_member_count(), preset.sigma,
                            derive_seed(seed, "end-member-data"));
      em_truth = normalized_truth_rows(em->X, visible);
    }

    std::optional<double> linear_bound;
    if (sys.has_linear_core()) {
      const Eigen::MatrixXd H = sys.linear_core();
      diag["condition_number"] = condition_number(H);
      diag["singular_values"] = vector_json(singular_values(H));
      const double d = unconstrained_oracle_error(H, preset.sigma);
      diag["d_oracle_uc_percent"] = d;
      if (sys.kind() == SystemKind::Linear || sys.kind() == SystemKind::HighdimLinear) linear_bound = d;
      if (!sys.obfuscating_indices().empty()) {
        const auto n_obf = static_cast<Index>(sys.obfuscating_indices().size());
        const Eigen::MatrixXd H1 = sys.matrix().rightCols(n_obf);
        const double m1_l1 = test.X.rightCols(n_obf).rowwise().sum().mean();
        const ObfuscatedBound ob = obfuscated_error_bound(H, H1, m1_l1, preset.sigma);
        diag["obfuscated_bound"] = {{"m1_l1_mean", m1_l1},
                                    {"oracle_term", ob.oracle_term},
                                    {"obfuscating_term", ob.obfuscating_term},
                                    {"bound", ob.bound}};
      }
    }
    if (sys.kind() == SystemKind::NoninvertibleG || sys.kind() == SystemKind::ObfuscatedNoninvertible) {
      const ThresholdingFloor f = thresholding_floor(sys.params().threshold);
      diag["thresholding_floor_percent"] = 100.0 * f.loss;
    }

    json simplex_ok = json::object();
    auto record = [&](const std::string& tag, const Eigen::MatrixXd& t, const Eigen::MatrixXd& est,
                      double seconds, std::optional<double> bound) {
      ErrorSummary s = summarize(tag, t, est);
      s.wall_time_s = seconds;
      s.bound_percent = bound;
      simplex_ok[tag] = rows_on_simplex(est, 1e-9);
      timings.emplace_back(tag, seconds);
      report.estimators.push_back(std::move(s));
    };
    const ComponentwiseInverse g_inv = [&sys](const Eigen::VectorXd& x) { return sys.core_inverse(x); };

    if (preset.estimators.oracle) {
      if (!sys.has_linear_core())
        throw ValidationError("oracle estimator needs a system with a linear core");
      start = Clock::now();
      const PseudoInverseEstimator oracle(sys.linear_core(), g_inv);
      const Eigen::MatrixXd est = oracle.estimate_rows(test.Y);
      record("oracle", truth, est, seconds_since(start), linear_bound);
      if (em) {
        start = Clock::now();
        record("oracle-end-members", em_truth, oracle.estimate_rows(em->Y), seconds_since(start),
               linear_bound);
      }
    }

    if (preset.estimators.benchmark) {
      if (!sys.has_linear_core())
        throw ValidationError("benchmark estimator needs a system with a linear core");
      start = Clock::now();
      const LinearFit fit =
          mle_system_matrix(sys.core_features(train_truth), train.Y, sys.linear_core());
      const PseudoInverseEstimator bench(fit.H_hat, g_inv);
      const Eigen::MatrixXd est = bench.estimate_rows(test.Y);
      record("benchmark", truth, est, seconds_since(start), linear_bound);
      if (fit.frob_rel_err) diag["mle_frob_rel_err"] = *fit.frob_rel_err;
      diag["mle_condition_number"] = fit.condition_number;
      if (em) {
        // training and test coincide on the end-member observations
        start = Clock::now();
        const LinearFit em_fit = mle_system_matrix(sys.core_features(em_truth), em->Y);
        const PseudoInverseEstimator em_bench(em_fit.H_hat, g_inv);
        record("benchmark-end-members", em_truth, em_bench.estimate_rows(em->Y), seconds_since(start),
               linear_bound);
      }
    }

    if (preset.estimators.knn.enabled) {
      const auto& kc = preset.estimators.knn;
      start = Clock::now();
      const KnnIndex index = KnnIndex::fit(train, visible);
      const PairedDataset knn_test = head(test, kc.n_test);
      const Eigen::MatrixXd knn_truth = normalized_truth_rows(knn_test.X, visible);
      const Eigen::MatrixXd est = index.predict_rows(knn_test.Y, kc.k, threads);
      record("knn", knn_truth, est, seconds_since(start), std::nullopt);
      diag["knn_k"] = kc.k;
      if (!kc.sweep.empty()) {
        start = Clock::now();
        report.knn_sweep = sweep_k(index, knn_test.Y, knn_truth, kc.sweep, threads);
        timings.emplace_back("knn-sweep", seconds_since(start));
        const auto best = std::min_element(
            report.knn_sweep.begin(), report.knn_sweep.end(),
            [](const KnnSweepPoint& a, const KnnSweepPoint& b) { return a.e_percent < b.e_percent; });
        diag["knn_best_k"] = best->k;
        diag["knn_best_e_percent"] = best->e_percent;
        if (out_dir) write_sweep_csv(report.knn_sweep, *out_dir / "knn_sweep.csv");
      }
    }

    if (preset.estimators.mlp.enabled) {
      const auto& mc = preset.estimators.mlp;
      start = Clock::now();
      mlp::NetworkSpec spec = mlp::NetworkSpec::standard(sys.observation_dim(), sys.visible_dim(),
                                                         mc.width_multiplier);
      if (!mc.hidden_widths.empty()) spec.hidden_widths = mc.hidden_widths;
      spec.use_batchnorm = mc.use_batchnorm;
      Rng init_rng = Rng::substream(seed, "mlp-init");
      mlp::Network net = mlp::build_network(spec, init_rng);
      diag["mlp_output_redraws"] = mlp::redraw_inactive_outputs(net, train.Y, init_rng);
      mlp::TrainingConfig tc = mc.training;
      tc.seed = derive_seed(seed, "mlp-train");
      mlp::Regenerator regen;
      if (tc.regenerate_every > 0) {
        regen = [&](int block) {
          const PairedDataset fresh = generate_dataset(
              sys, sampler, preset.n_train, preset.sigma,
              derive_seed(seed, "train-data-block-" + std::to_string(block)));
          return mlp::make_training_set(fresh, visible);
        };
      }
      mlp::TrainedModel model;
      try {
        model = mlp::train(std::move(net), mlp::make_training_set(train, visible), tc, regen);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string("mlp: ") + e.what());
      }
      const double train_seconds = seconds_since(start);
      timings.emplace_back("mlp-train", train_seconds);
      start = Clock::now();
      const Eigen::MatrixXd est = model.network.predict(test.Y);
      record("mlp", truth, est, train_seconds + seconds_since(start), std::nullopt);
      diag["mlp_parameter_count"] = model.network.parameter_count();
      diag["mlp_hidden_widths"] = spec.hidden_widths;
      diag["mlp_best_epoch"] = model.best_epoch;
      diag["mlp_best_val_loss"] = model.best_val_loss;
      if (em) {
        start = Clock::now();
        record("mlp-end-members", em_truth, model.network.predict(em->Y), seconds_since(start),
               std::nullopt);
      }
      if (out_dir) {
        mlp::write_history_csv(model.history, *out_dir / "mlp_history.csv");
        if (mc.save_checkpoint) mlp::save_checkpoint(model.network, *out_dir / "mlp_checkpoint.json");
      }
    }
    diag["rows_on_simplex"] = simplex_ok;
  }

  if (out_dir) {
    {
      std::ofstream out(*out_dir / "report.json");
      out << std::setw(2) << report.to_json(!options.deterministic) << '\n';
    }
    {
      std::ofstream out(*out_dir / "errors.csv");
      out << "estimator_tag,component_index,aad_percent\n" << std::setprecision(10);
      for (const auto& e : report.estimators)
        for (Index i = 0; i < e.aad_percent.size(); ++i)
          out << e.estimator_tag << ',' << i << ',' << e.aad_percent(i) << '\n';
    }
    {
      std::ofstream out(*out_dir / "timings.csv");
      out << "stage,wall_time_s\n" << std::setprecision(6);
      for (const auto& [stage, t] : timings) out << stage << ',' << t << '\n';
    }
  }
  if (options.log) print_summary(*options.log, report, options.deterministic);
  return report;
}

}  // namespace compinv::exp
