#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pmcmc/mvt.hpp"
#include "pmcmc/partition.hpp"
#include "pmcmc/samplers.hpp"
#include "pmcmc/targets.hpp"

namespace pmcmc {

class Rng;

/// An element had too few draws to fit an instrumental; it needs more
/// exploration or a coarser partition.
class InsufficientDrawsError : public Error {
 public:
  using Error::Error;
};

enum class Location { kClusterCenter, kEmpiricalMode, kEmpiricalMean, kHessianMode };

std::string to_string(Location l);
Location location_from_string(const std::string& s);

struct InstrumentalOptions {
  Location location = Location::kClusterCenter;
  double nu = 4.0;  // MvtDist::kNormal for the normal limit
  /// Multiplies the fitted scale matrix (so sd grows by sqrt(inflation)).
  double inflation = 1.0;
};

/// t_nu instrumental for one element: empirical covariance S of the element
/// draws (rows of `element_draws`), regularized by 1e-8 trace(S)/p I.
/// `center` is required for kClusterCenter and `target` for kEmpiricalMode.
MvtDist fit_instrumental(const Matrix& element_draws, const InstrumentalOptions& opts,
                         const Target* target = nullptr, const Vector* center = nullptr);

/// t_nu centered at the mode reached from `start`, with scale the inverse of
/// the negative Hessian of log g there.
MvtDist laplace_instrumental(const Target& target, const Vector& start, double nu = 4.0,
                             double inflation = 1.0);

/// log of T^{-1} sum_t g(x_t) 1[x_t in element] / q(x_t) with x_t iid from q.
/// Returns -inf when no draw lands in the element.
double is_log_c_hat(const Target& target, const MvtDist& q, int element, const Partition& partition,
                    int T, Rng& rng);
inline double is_c_hat(const Target& target, const MvtDist& q, int element,
                       const Partition& partition, int T, Rng& rng) {
  return std::exp(is_log_c_hat(target, q, element, partition, T, rng));
}

/// Same estimator over the states of a t4 trajectory, each weighted by its
/// own per-state instrumental density (conditional on the previous state).
double trajectory_log_c_hat(const Target& target, const MvtDist& q_center, int element,
                            const Partition& partition, const TrajectoryOptions& opts, Rng& rng);

/// Column sums over the grand sum of an n x J matrix of estimates.
Vector ratio_weights(const Matrix& c_hats);
/// ratio_weights on log-scale estimates, without overflow.
Vector ratio_weights_log(const Matrix& log_c_hats);

struct PseudoMarginalStats {
  double acceptance_rate = 0.0;
  Vector se;  // batch-means standard error of each occupancy frequency
};

/// Metropolis chain on {0..J-1} with uniform proposals whose acceptance ratio
/// uses fresh estimates for the proposed element and the retained estimate
/// for the current one. Returns occupancy frequencies.
/// `log_c_hat_sampler(j, rng)` returns a fresh log estimate for element j.
Vector pseudo_marginal_weights(const std::function<double(int, Rng&)>& log_c_hat_sampler, int J,
                               std::int64_t iters, Rng& rng, PseudoMarginalStats* stats = nullptr);

enum class WeightMethod { kRatio, kPseudoMarginal };
enum class ReplicateSampler { kIid, kTrajectory };

std::string to_string(WeightMethod m);
WeightMethod weight_method_from_string(const std::string& s);
std::string to_string(ReplicateSampler s);
ReplicateSampler replicate_sampler_from_string(const std::string& s);

struct WeightOptions {
  WeightMethod method = WeightMethod::kRatio;
  ReplicateSampler sampler = ReplicateSampler::kIid;
  std::int64_t replicates = 1000;  // n
  int T = 10;
  TrajectoryOptions trajectory;   // length is overridden by T
  std::int64_t pm_iterations = 0;  // 0: n * J
};

struct WeightEstimate {
  WeightMethod method = WeightMethod::kRatio;
  /// n x J replicate estimates, stored as exp(log c_hat - log_scale).
  Matrix c_hats;
  double log_scale = 0.0;
  int T = 0;
  Vector w_hat;
  Vector mcse;
  std::vector<std::string> warnings;

  Vector c_hat_mean() const;
  Vector c_hat_se() const;
};

/// Estimates element weights with one instrumental per element. Replicate
/// (j, i) draws from its own stream, so results do not depend on `workers`.
WeightEstimate estimate_weights(const Target& target, const Partition& partition,
                                const std::vector<MvtDist>& instrumentals, const WeightOptions& opts,
                                std::uint64_t seed, int workers);

/// Writes {method, c_hat_summary: {n, T, log_scale, mean, se, max}, w_hat, mcse}.
void write_weights_json(const std::filesystem::path& path, const WeightEstimate& w);
/// Reads the fields needed downstream (method, w_hat, mcse).
WeightEstimate read_weights_json(const std::filesystem::path& path);

}  // namespace pmcmc
