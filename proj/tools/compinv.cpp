// compinv: experiment runner for compositional inversion.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "compinv/errors.hpp"
#include "compinv/experiment.hpp"
#include "compinv/mlp.hpp"
#include "compinv/simplex.hpp"

namespace {

using namespace compinv;

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Index> parse_ints(const std::string& text, const char* what) {
  std::vector<Index> out;
  for (const auto& s : split(text)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || v != std::floor(v)) throw std::invalid_argument(s);
      out.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": '" + s + "' is not an integer");
    }
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
  return out;
}

std::vector<double> parse_reals(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const auto& s : split(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": '" + s + "' is not a number");
    }
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
  return out;
}

// "1e6" and "1000000" are both accepted for counts.
std::int64_t parse_count(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || v < 1 || v != std::floor(v)) throw std::invalid_argument(text);
    return static_cast<std::int64_t>(v);
  } catch (const std::exception&) {
    throw ValidationError(std::string(what) + ": '" + text + "' is not a positive count");
  }
}

int grad_check_command(std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "grad-check");
  mlp::NetworkSpec spec;
  spec.input_dim = 5;
  spec.hidden_widths = {8, 8};
  spec.output_dim = 3;
  mlp::Network net = mlp::build_network(spec, rng);
  Eigen::MatrixXd x(8, 5);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  const Eigen::MatrixXd t = sample_uniform_simplex(3, 8, rng);
  const mlp::GradCheckReport report = mlp::grad_check(net, x, t, 1e-5);
  std::cout << std::left << std::setw(7) << "layer" << std::setw(15) << "type" << std::setw(8)
            << "param" << "max_rel_dev\n";
  for (const auto& d : report.tensors)
    std::cout << std::left << std::setw(7) << d.layer << std::setw(15) << d.layer_type << std::setw(8)
              << d.parameter << std::scientific << std::setprecision(3) << d.max_relative_deviation
              << std::defaultfloat << '\n';
  std::cout << "max relative deviation " << std::scientific << report.max_relative_deviation << '\n';
  if (report.max_relative_deviation >= 1e-4) {
    std::cerr << "gradient check failed\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compositional inversion experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list the built-in presets");

  std::string preset;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::vector<std::string> sets;
  bool deterministic = false;
  std::string config_path;

  auto* run = app.add_subcommand("run", "run a preset and write report.json, errors.csv and logs");
  run->add_option("preset", preset, "preset name (omit with --config)");
  run->add_option("--seed", seed, "base seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--set", sets, "override, dotted.key=value (repeatable)");
  run->add_option("--config", config_path, "run a JSON config instead of a built-in preset");
  run->add_flag("--deterministic", deterministic, "single-threaded, timings written as 0");

  std::string ks_text = "1,3,5,7,9,11,13,15,17,19,21,23,25,27,29,31";
  auto* sweep = app.add_subcommand("knn-sweep", "k-sweep of the kNN estimator on a preset");
  sweep->add_option("preset", preset, "preset name")->required();
  sweep->add_option("--ks", ks_text, "comma-separated k values");
  sweep->add_option("--seed", seed, "base seed");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--set", sets, "override, dotted.key=value (repeatable)");
  sweep->add_flag("--deterministic", deterministic, "single-threaded, timings written as 0");

  std::string system_config;
  double sigma = 0.005;
  auto* bounds = app.add_subcommand("bounds", "closed-form bounds for a system config");
  bounds->add_option("system-config", system_config, "JSON file with a system object")->required();
  bounds->add_option("--sigma", sigma, "noise standard deviation");
  bounds->add_option("--seed", seed, "seed for generated matrices");

  std::string dims_text = "2,3,5,7,10,15";
  std::string thresholds_text = "0.7,0.8,0.9,0.99";
  std::string draws_text = "1e6";
  auto* volume = app.add_subcommand("volume-mc", "simplex volume concentration, Monte Carlo vs closed form");
  volume->add_option("--dims", dims_text, "comma-separated dimensions");
  volume->add_option("--thresholds", thresholds_text, "comma-separated thresholds T");
  volume->add_option("--draws", draws_text, "draws per grid point");
  volume->add_option("--seed", seed, "base seed");
  volume->add_option("--out", out_dir, "write volume_mc.csv here");

  auto* grad = app.add_subcommand("grad-check", "finite-difference check of the network gradients");
  grad->add_option("--seed", seed, "base seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      exp::list_presets(std::cout);
      return 0;
    }
    if (run->parsed() || sweep->parsed()) {
      exp::RunOptions options;
      options.seed = seed;
      options.deterministic = deterministic;
      options.log = &std::cout;
      if (!out_dir.empty()) options.out_dir = out_dir;
      if (preset.empty() && config_path.empty()) throw ValidationError("run: give a preset or --config");
      exp::ExperimentPreset p =
          config_path.empty() ? exp::find_preset(preset) : exp::parse_config(config_path);
      if (sweep->parsed()) {
        std::string ks = "estimators.knn.sweep=[";
        for (Index k : parse_ints(ks_text, "--ks")) ks += std::to_string(k) + ",";
        ks.back() = ']';
        sets.insert(sets.begin(), {"estimators.knn.enabled=true", ks, "estimators.oracle=false",
                                   "estimators.benchmark=false", "estimators.mlp.enabled=false"});
      }
      const exp::ExperimentReport report = exp::run(exp::apply_overrides(p, sets), options);
      if (sweep->parsed()) {
        std::cout << "k,e_percent\n";
        for (const auto& pt : report.knn_sweep) std::cout << pt.k << ',' << pt.e_percent << '\n';
      }
      return 0;
    }
    if (bounds->parsed()) {
      std::ifstream in(system_config);
      if (!in) throw ValidationError("cannot read " + system_config);
      exp::json doc;
      try {
        doc = exp::json::parse(in);
      } catch (const exp::json::exception& e) {
        throw ValidationError(system_config + ": " + e.what());
      }
      // accept either a bare system object or a preset-like document with a "system" key
      exp::json wrapped = doc.contains("system") ? doc : exp::json{{"system", doc}};
      if (!wrapped.contains("name")) wrapped["name"] = "bounds";
      if (!wrapped.contains("estimators")) wrapped["estimators"] = {{"oracle", true}};
      const exp::ExperimentPreset p = exp::parse_preset(wrapped);
      const double s = doc.contains("sigma") && !bounds->count("--sigma") ? p.sigma : sigma;
      std::cout << std::setw(2) << exp::system_bounds(p.system, s, seed) << '\n';
      return 0;
    }
    if (volume->parsed()) {
      exp::VolumeConfig config;
      config.dims = parse_ints(dims_text, "--dims");
      config.thresholds = parse_reals(thresholds_text, "--thresholds");
      config.draws = parse_count(draws_text, "--draws");
      exp::ExperimentPreset p = exp::find_preset("volume_mc");
      p.volume = config;
      exp::RunOptions options;
      options.seed = seed;
      if (!out_dir.empty()) options.out_dir = out_dir;
      const exp::ExperimentReport report = exp::run(p, options);
      std::cout << "M,quantity,parameter,closed_form,mc_estimate,mc_stderr,hits\n" << std::setprecision(8);
      for (const auto& r : report.volume)
        std::cout << r.M << ',' << r.quantity << ',' << r.parameter << ',' << r.estimate.closed_form
                  << ',' << r.estimate.estimate << ',' << r.estimate.standard_error << ','
                  << r.estimate.hits << '\n';
      return 0;
    }
    if (grad->parsed()) return grad_check_command(seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
