#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pmcmc/combine.hpp"
#include "pmcmc/config.hpp"
#include "pmcmc/diagnostics.hpp"
#include "pmcmc/draws.hpp"
#include "pmcmc/partition.hpp"
#include "pmcmc/targets.hpp"
#include "pmcmc/weights.hpp"

namespace pmcmc {

/// Wraps a failure inside one pipeline stage; the CLI reports the stage name
/// and exits with code 1.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentModel {
  Target target;
  std::optional<GaussianMixture> mixture;
  std::optional<ProbitModel> probit;
  std::optional<LohModel> loh;
  /// Quantity averaged in reports: theta itself, or the natural LOH
  /// parameters.
  Statistic statistic;
};

ExperimentModel build_model(const ExperimentConfig& cfg);

/// File names inside the output directory.
struct OutputLayout {
  std::filesystem::path dir;
  std::filesystem::path draws(int chain) const;
  std::vector<std::filesystem::path> all_draws(int chains) const;
  std::filesystem::path partition() const { return dir / "partition.json"; }
  std::filesystem::path weights() const { return dir / "weights.json"; }
  std::filesystem::path report() const { return dir / "report.json"; }
  std::filesystem::path diagnostics_csv() const { return dir / "diagnostics.csv"; }
  std::filesystem::path serial_csv() const { return dir / "diagnostics_serial.csv"; }
  std::filesystem::path diagnostics_json() const { return dir / "diagnostics.json"; }
};

/// Optional overrides for stage inputs; empty fields fall back to the
/// output layout.
struct StageInputs {
  std::vector<std::filesystem::path> draws;
  std::filesystem::path partition;
  std::filesystem::path weights;
  std::filesystem::path reference;
  std::filesystem::path output;
  /// Use only draws with iteration <= prefix (for working on a run that is
  /// still sampling).
  std::optional<std::int64_t> prefix;
};

std::vector<ChainConfig> chain_configs(const ExperimentConfig& cfg, int dim);

DrawStore stage_sample(const ExperimentConfig& cfg, const ExperimentModel& model);
Partition stage_partition(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in = {});
WeightEstimate stage_weights(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in = {});
CombinedEstimate stage_combine(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in = {});

struct DiagnosticsSummary {
  Vector w_hat;
  std::optional<Vector> occupancy;        // reference mass per element
  std::optional<double> weight_tv;        // 0.5 sum |w_hat - occupancy|
  std::optional<Vector> component_weights;  // w_hat summed by nearest true mean
  std::optional<double> mean_abs_error;   // vs the true mixture mean
  Vector lag1;                            // per coordinate, averaged over chains
  std::optional<ConvergenceTrace> combined;
  std::optional<double> combined_tv;      // TV of all pooled post-burn-in draws
  std::optional<ConvergenceTrace> serial;
  std::optional<double> serial_tv_at_pooled;
  std::optional<std::int64_t> serial_reaches_combined;
};

DiagnosticsSummary stage_diagnose(const ExperimentConfig& cfg, const ExperimentModel& model,
                                  const StageInputs& in = {});

/// Runs every stage through the same files the staged commands use.
void cmd_run(const ExperimentConfig& cfg);
std::string stage_plan(const ExperimentConfig& cfg);

/// Writes simulated data: "probit1", "probit8", or "loh". `n` < 0 selects
/// the model's default size.
void cmd_simulate(const std::string& model, std::int64_t n, std::uint64_t seed, const std::filesystem::path& out);

void write_summary_json(const std::filesystem::path& path, const DiagnosticsSummary& s);

}  // namespace pmcmc
