#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmcmc/partition.hpp"
#include "pmcmc/samplers.hpp"
#include "pmcmc/types.hpp"
#include "pmcmc/weights.hpp"

namespace pmcmc {

/// Raised for malformed or out-of-range configuration; the CLI maps it to
/// exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Flat `key = value` text. `#` starts a comment; `[name]` lines prefix the
/// following keys with `name.`.
std::map<std::string, std::string> parse_key_values(const std::string& text);

enum class Model { kMixture2d, kRandomMixture, kProbit, kLoh };
std::string to_string(Model m);

enum class PartitionMethod { kCluster, kModes, kQuantiles };
/// box: uniform on [init_lo, init_hi]; point: init_point; logit_uniform:
/// logit(u) with u uniform on (0,1)^p; modes: chain c starts at
/// partition.modes[c mod #modes].
enum class InitMethod { kBox, kPoint, kLogitUniform, kModes };
enum class Reference { kNone, kMixture, kProbitRejection, kLongRun };
enum class BinSet { kNone, kProbitOne, kProbitEight };

struct TargetSpec {
  Model model = Model::kMixture2d;
  // random_mixture
  int dim = 10;
  int components = 4;
  std::uint64_t mixture_seed = 1;
  double cov_scale = 1.0;
  // probit / loh
  std::filesystem::path data;
  double prior_variance = 100.0;
  double prior_bound = 30.0;
};

struct ChainSpec {
  int count = 10;
  Kernel kernel = Kernel::kLangevin;
  std::int64_t iterations = 25000;
  std::int64_t burn_in = 0;
  double step = 0.1;
  bool adapt = true;
  std::int64_t adapt_window = 1000;
  int thin = 1;
  InitMethod init = InitMethod::kBox;
  std::vector<double> init_lo{-10.0};
  std::vector<double> init_hi{10.0};
  std::vector<double> init_point;
};

struct PartitionSpec {
  PartitionMethod method = PartitionMethod::kCluster;
  double epsilon2 = 9.0;
  double alpha = 0.01;
  bool normalize = false;
  Transform transform = Transform::kIdentity;
  std::size_t max_points = 10000;
  /// Post-burn-in draws per chain used for clustering; 0 means all.
  std::int64_t prefix = 1000;
  /// `modes`: starting points for Newton ascent, one per element.
  std::vector<std::vector<double>> modes;
  /// `quantiles`: probabilities of the first coordinate.
  std::vector<double> quantiles;
};

struct WeightSpec {
  WeightMethod method = WeightMethod::kRatio;
  ReplicateSampler sampler = ReplicateSampler::kIid;
  std::int64_t n = 1000;
  int T = 10;
  InstrumentalOptions instrumental;
  double trajectory_sigma = 1.0;
  std::int64_t pm_iterations = 0;
  /// Post-burn-in draws per chain used to fit instrumentals; 0 means all.
  std::int64_t prefix = 0;
};

struct DiagnosticsSpec {
  Reference reference = Reference::kNone;
  std::int64_t reference_draws = 100000;
  BinSet bins = BinSet::kNone;
  int coordinate = 0;
  double threshold = 0.10;
  std::int64_t every = 10000;
  /// Serial comparison chain; 0 disables it.
  std::int64_t serial_iterations = 0;
  // long_run reference
  int long_run_chains = 4;
  std::int64_t long_run_burn_in = 10000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  int workers = 0;  // 0: hardware concurrency
  std::filesystem::path out = "out";
  TargetSpec target;
  ChainSpec chains;
  PartitionSpec partition;
  WeightSpec weights;
  DiagnosticsSpec diagnostics;

  /// Throws ConfigError describing the first violation.
  void validate() const;
};

/// Parses and validates. Relative data paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

int resolve_workers(int requested);

}  // namespace pmcmc
