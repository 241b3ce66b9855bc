#include "pmcmc/executor.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

namespace pmcmc {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  if (workers < 1) throw Error("parallel_for: workers must be >= 1");
  if (n == 0) return;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::optional<std::size_t> first_failure;
  std::string failure_message;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!first_failure || i < *first_failure) {
          first_failure = i;
          failure_message = e.what();
        }
        failed = true;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_failure || i < *first_failure) {
          first_failure = i;
          failure_message = "unknown exception";
        }
        failed = true;
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_failure) throw TaskError(*first_failure, failure_message);
}

DrawStore run_parallel_chains(std::span<const ChainConfig> cfgs, int workers, const ChainRunner& run) {
  std::vector<DrawStore> parts(cfgs.size());
  try {
    parallel_for(cfgs.size(), workers, [&](std::size_t i) { parts[i] = run(cfgs[i]); });
  } catch (const TaskError& e) {
    throw Error("chain " + std::to_string(cfgs[e.index()].chain_id) + " aborted: " + e.what());
  }
  if (parts.empty()) return DrawStore(0);
  DrawStore merged(parts.front().dim());
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  merged.reserve(total);
  for (const auto& p : parts) merged.merge(p, false);
  merged.canonical_sort();
  return merged;
}

DrawStore run_parallel_chains(const Target& target, std::span<const ChainConfig> cfgs, int workers) {
  DrawStore out = run_parallel_chains(cfgs, workers, [&](const ChainConfig& c) {
    switch (c.kernel) {
      case Kernel::kLangevin:
        return langevin_chain(target, c);
      case Kernel::kRwm:
        return rwm_chain(target, c);
      case Kernel::kGibbsProbit:
        break;
    }
    throw Error("Gibbs probit chains need a ProbitModel, not a generic target");
  });
  if (out.dim() == 0) out = DrawStore(target.dim);
  return out;
}

DrawStore run_parallel_chains(const ProbitModel& model, std::span<const ChainConfig> cfgs, int workers) {
  const Target target = model.as_target();
  DrawStore out = run_parallel_chains(cfgs, workers, [&](const ChainConfig& c) {
    return c.kernel == Kernel::kGibbsProbit ? gibbs_probit_chain(model, c)
           : c.kernel == Kernel::kRwm       ? rwm_chain(target, c)
                                            : langevin_chain(target, c);
  });
  if (out.dim() == 0) out = DrawStore(model.dim());
  return out;
}

}  // namespace pmcmc
