#include <benchmark/benchmark.h>

#include "pmcmc/executor.hpp"
#include "pmcmc/partition.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/samplers.hpp"
#include "pmcmc/targets.hpp"
#include "pmcmc/weights.hpp"

using namespace pmcmc;

namespace {

std::vector<ChainConfig> mixture_chains(int chains, std::int64_t iterations) {
  std::vector<ChainConfig> cfgs;
  for (int c = 0; c < chains; ++c) {
    ChainConfig cfg;
    cfg.kernel = Kernel::kLangevin;
    cfg.chain_id = c;
    cfg.step_scale = 0.5;
    cfg.iterations = iterations;
    cfg.burn_in = iterations / 10;
    cfg.seed = derive_seed(1, StreamDomain::kChain, static_cast<std::uint64_t>(c));
    cfg.init = UniformBox{Vector::Constant(2, -10.0), Vector::Constant(2, 10.0)};
    cfgs.push_back(cfg);
  }
  return cfgs;
}

// Eight Langevin chains on the 2-d mixture; the argument is the worker count.
void BM_MixtureChains(benchmark::State& state) {
  const auto mix = four_mode_mixture();
  const Target target = mix.as_target();
  const auto cfgs = mixture_chains(8, 5000);
  for (auto _ : state) benchmark::DoNotOptimize(run_parallel_chains(target, cfgs, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * 8 * 5000);
}
BENCHMARK(BM_MixtureChains)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

// Weight estimation for the mode-centered partition; the argument is T.
void BM_IsReplicates(benchmark::State& state) {
  const auto mix = four_mode_mixture();
  const Target target = mix.as_target();
  const auto part = Partition::from_original_centers(mix.means());
  std::vector<MvtDist> qs;
  for (const auto& mu : mix.means()) qs.push_back(laplace_instrumental(target, mu));
  WeightOptions opts;
  opts.replicates = 1000;
  opts.T = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_weights(target, part, qs, opts, 2, 1));
  state.SetItemsProcessed(state.iterations() * 4 * 1000 * opts.T);
}
BENCHMARK(BM_IsReplicates)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

// Nearest-center assignment; the argument is the number of centers.
void BM_Assign(benchmark::State& state) {
  Rng rng(3);
  const int J = static_cast<int>(state.range(0));
  std::vector<Vector> centers;
  for (int j = 0; j < J; ++j) centers.push_back(rng.normal_vector(10));
  const auto part = Partition::from_original_centers(centers);
  std::vector<Vector> points;
  for (int i = 0; i < 1024; ++i) points.push_back(rng.normal_vector(10));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(part.assign(points[i++ & 1023]));
}
BENCHMARK(BM_Assign)->Arg(4)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
