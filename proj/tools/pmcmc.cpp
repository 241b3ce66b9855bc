// pmcmc: run parallel MCMC experiments from a config file.
//
//   pmcmc run --config configs/mixture2d.cfg [--seed N] [--workers N] [--out DIR] [--dry-run]
//   pmcmc simulate probit1 --out data/probit1.csv [--n N] [--seed N]
//   pmcmc stage weights --config C [--draws a.csv b.csv ...] [--prefix N] [--output F]
//
// Exit codes: 0 success, 1 pipeline failure, 2 invalid configuration or usage.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "pmcmc/config.hpp"
#include "pmcmc/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "experiment config file")->required();
  app->add_option("--seed", o.seed, "master seed (overrides the config)");
  app->add_option("--workers", o.workers, "worker threads, 0 = all cores (overrides the config)");
  app->add_option("--out", o.out, "output directory (overrides the config)");
}

pmcmc::ExperimentConfig load(const Overrides& o) {
  auto cfg = pmcmc::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.out.empty()) cfg.out = o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel MCMC with Voronoi partitioning and importance-sampled weights"};
  app.require_subcommand(1);

  Overrides run_o;
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "sample, partition, estimate weights, combine and diagnose");
  add_common(run, run_o);
  run->add_flag("--dry-run", dry_run, "validate the config and print the stage plan");

  std::string sim_model, sim_out;
  std::int64_t sim_n = -1;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "write simulated data (probit1, probit8, loh)");
  sim->add_option("model", sim_model, "probit1 | probit8 | loh")->required();
  sim->add_option("--out", sim_out, "output CSV")->required();
  sim->add_option("--n", sim_n, "number of rows (default: 2000, 500 or 40)");
  sim->add_option("--seed", sim_seed, "seed");

  Overrides st_o;
  std::string stage_name;
  pmcmc::StageInputs inputs;
  std::vector<std::string> draw_paths;
  std::int64_t prefix = 0;
  std::string partition_path, weights_path, reference_path, output_path;
  auto* stage = app.add_subcommand("stage", "run a single stage on existing files");
  stage->add_option("stage", stage_name, "sample | partition | weights | combine | diagnose")
      ->required()
      ->check(CLI::IsMember({"sample", "partition", "weights", "combine", "diagnose"}));
  add_common(stage, st_o);
  stage->add_option("--draws", draw_paths, "draw CSV files (default: the run's per-chain files)");
  stage->add_option("--prefix", prefix, "use only draws with iteration <= N");
  stage->add_option("--partition", partition_path, "partition JSON");
  stage->add_option("--weights", weights_path, "weights JSON");
  stage->add_option("--reference", reference_path, "reference draws CSV (diagnose)");
  stage->add_option("--output", output_path, "output file (default: inside --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      const auto cfg = load(run_o);
      if (dry_run) {
        pmcmc::build_model(cfg);
        std::cout << pmcmc::stage_plan(cfg);
        return 0;
      }
      pmcmc::cmd_run(cfg);
      std::cout << "wrote " << cfg.out.string() << "\n";
    } else if (*sim) {
      pmcmc::cmd_simulate(sim_model, sim_n, sim_seed, sim_out);
    } else if (*stage) {
      const auto cfg = load(st_o);
      const auto model = pmcmc::build_model(cfg);
      for (const auto& p : draw_paths) inputs.draws.emplace_back(p);
      if (prefix > 0) inputs.prefix = prefix;
      inputs.partition = partition_path;
      inputs.weights = weights_path;
      inputs.reference = reference_path;
      inputs.output = output_path;
      if (stage_name == "sample") pmcmc::stage_sample(cfg, model);
      else if (stage_name == "partition") pmcmc::stage_partition(cfg, model, inputs);
      else if (stage_name == "weights") pmcmc::stage_weights(cfg, model, inputs);
      else if (stage_name == "combine") pmcmc::stage_combine(cfg, model, inputs);
      else pmcmc::stage_diagnose(cfg, model, inputs);
    }
  } catch (const pmcmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pmcmc::StageError& e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
