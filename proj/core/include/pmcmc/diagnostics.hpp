#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pmcmc/draws.hpp"
#include "pmcmc/partition.hpp"
#include "pmcmc/targets.hpp"
#include "pmcmc/types.hpp"

namespace pmcmc {

class Rng;

/// Ordered, disjoint bins (lo, hi] on the real line; lo may be -inf and hi
/// may be +inf. Gaps between bins are allowed: points falling in a gap belong
/// to no bin but still count toward the total mass.
class Discretization {
 public:
  struct Bin {
    double lo;
    double hi;
  };

  explicit Discretization(std::vector<Bin> bins);
  /// (-inf, e0], (e0, e1], ..., (e_last, inf).
  static Discretization from_edges(const std::vector<double>& edges);

  std::size_t size() const { return bins_.size(); }
  const std::vector<Bin>& bins() const { return bins_; }
  std::optional<std::size_t> locate(double x) const;

 private:
  std::vector<Bin> bins_;
};

/// (-inf, 0], ((i-1)/2, i/2] for i = 1..50, (25, inf).
Discretization probit_one_bins();
/// (-inf, 3.5], (3.5, 4.0], ..., (14.5, 15.0], (16, 17], ..., (24, 25], (25, inf);
/// (15, 16] is deliberately absent.
Discretization probit_eight_bins();

/// Bin probabilities (mass in bin over total mass). Empty `masses` means
/// equal masses.
Vector histogram(std::span<const double> values, std::span<const double> masses, const Discretization& d);

/// 0.5 * sum |p - q| over bins.
double tv_distance(const Vector& p, const Vector& q);
double tv_distance(std::span<const double> a, std::span<const double> a_masses, std::span<const double> b,
                   const Discretization& d);

double lag_autocorrelation(std::span<const double> series, std::size_t lag);
/// Batch-means standard error of the series mean.
double batch_means_se(std::span<const double> series, int batches = 20);

struct ConvergencePoint {
  std::int64_t checkpoint;
  double tv;  // NaN when the estimate is not yet defined at this checkpoint
};

struct ConvergenceTrace {
  std::vector<ConvergencePoint> points;
  std::optional<std::int64_t> reached;  // first checkpoint with tv <= threshold
};

/// TV of the running histogram of a single stream against `reference`,
/// evaluated every `every` draws.
ConvergenceTrace iterations_to_threshold(std::span<const double> stream, const Vector& reference,
                                         const Discretization& d, double threshold,
                                         std::int64_t every = 10000);

/// Same for the weighted combination of parallel chains: at checkpoint k the
/// estimate uses post-burn-in draws with iteration <= k from every chain and
/// the fixed element weights `w_hat`.
ConvergenceTrace combined_convergence(const DrawStore& draws, const Partition& partition, const Vector& w_hat,
                                      int coordinate, const Vector& reference, const Discretization& d,
                                      double threshold, std::int64_t every = 10000);

// Reference ("truth") generators.

/// Exact posterior draws for a one-covariate probit model: prior proposals
/// accepted with probability L(beta) / max L.
std::vector<double> probit_rejection_reference(const ProbitModel& model, std::size_t n, Rng& rng);
/// Independent mixture draws (rows).
Matrix mixture_reference(const GaussianMixture& mixture, std::size_t n, Rng& rng);
/// Long random-walk Metropolis run split over `chains` chains.
DrawStore long_run_reference(const Target& target, const Vector& start, const Matrix& proposal_covariance,
                             std::int64_t iterations_per_chain, std::int64_t burn_in, int chains, int workers,
                             std::uint64_t seed);

/// Fraction of rows falling in each partition element.
Vector element_occupancy(const Partition& partition, const Matrix& points);

/// Sums element weights by the mixture component whose mean is nearest to
/// each element center.
Vector component_weights(const Partition& partition, const Vector& w_hat, const GaussianMixture& mixture);

/// Reference draws as CSV with header theta_1..theta_p.
void write_reference_csv(const std::filesystem::path& path, const Matrix& points);
Matrix read_reference_csv(const std::filesystem::path& path);

}  // namespace pmcmc
