#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pmcmc/draws.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/samplers.hpp"
#include "pmcmc/targets.hpp"

namespace pmcmc {

/// Raised when a task fails; carries the index of the failing chain or
/// replicate.
class TaskError : public Error {
 public:
  TaskError(std::size_t index, const std::string& what)
      : Error("task " + std::to_string(index) + " failed: " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Runs task(i) for i in [0, n) on `workers` threads. Tasks are claimed in any
/// order. If tasks throw, the lowest failing index is rethrown as TaskError
/// after all workers have stopped.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

using ChainRunner = std::function<DrawStore(const ChainConfig&)>;

/// Runs every chain and merges the output in (chain id, iteration) order, so
/// the result does not depend on the worker count or completion order.
DrawStore run_parallel_chains(std::span<const ChainConfig> cfgs, int workers, const ChainRunner& run);
/// Langevin or random-walk chains on a generic target.
DrawStore run_parallel_chains(const Target& target, std::span<const ChainConfig> cfgs, int workers);
/// Albert-Chib chains.
DrawStore run_parallel_chains(const ProbitModel& model, std::span<const ChainConfig> cfgs, int workers);

/// Runs n independent replicates. Replicate i draws from the stream
/// (master, domain, i) and its result lands in slot i.
template <class F>
auto run_parallel_replicates(std::size_t n, int workers, std::uint64_t master, StreamDomain domain,
                             F&& task) -> std::vector<decltype(task(std::size_t{}, std::declval<Rng&>()))> {
  using R = decltype(task(std::size_t{}, std::declval<Rng&>()));
  std::vector<R> results(n);
  parallel_for(n, workers, [&](std::size_t i) {
    Rng rng = Rng::stream(master, domain, i);
    results[i] = task(i, rng);
  });
  return results;
}

}  // namespace pmcmc
