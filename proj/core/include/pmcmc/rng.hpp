#pragma once

#include <cstdint>
#include <random>

#include "pmcmc/types.hpp"

namespace pmcmc {

/// Stream domains. Each consumer of randomness draws from its own domain so
/// that adding draws in one stage never shifts the sequence of another.
enum class StreamDomain : std::uint64_t {
  kChain = 1,
  kWeights = 2,
  kReference = 3,
  kPseudoMarginal = 4,
  kSimulate = 5,
  kMixture = 6,
  kTest = 99,
};

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream `index` of `domain` under `master`. Distinct
/// (master, domain, index) triples give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain, std::uint64_t index);

/// Private random stream owned by one chain or replicate. Not thread-safe;
/// never share an instance between workers.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t master, StreamDomain domain, std::uint64_t index) {
    return Rng(derive_seed(master, domain, index));
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const { return seed_; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  Vector normal_vector(Eigen::Index n);
  double exponential(double rate);
  double chi_squared(double dof);
  std::int64_t poisson(double mean);
  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pmcmc
