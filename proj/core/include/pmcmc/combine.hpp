#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pmcmc/draws.hpp"
#include "pmcmc/partition.hpp"
#include "pmcmc/types.hpp"

namespace pmcmc {

/// Raised when an element with no draws carries weight above the drop
/// threshold: the chains never explored mass the weights say is there.
class UnexploredElementError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kEmptyElementThreshold = 0.001;

using Statistic = std::function<Vector(const Vector&)>;

/// f(theta) = theta.
Statistic identity_statistic();

struct ElementMeans {
  std::vector<Vector> means;  // zero vector for empty elements
  std::vector<Vector> se;     // batch means over the (chain, iter) ordered series
  std::vector<std::int64_t> counts;
  std::vector<bool> empty;
};

/// Per-element means of f over post-burn-in draws pooled across chains.
ElementMeans element_means(const Statistic& f, const DrawStore& draws, const Partition& partition);

struct CombinedEstimate {
  std::vector<Vector> per_element_means;
  std::vector<Vector> per_element_se;
  std::vector<std::int64_t> counts;
  Vector weights;  // after dropping negligible empty elements
  Vector combined;
  Vector combined_se;
  std::vector<int> dropped;
  std::vector<std::string> warnings;
};

/// mu_hat = sum_j w_j mu_hat_j, summed in element order.
///
/// Standard error treats elements as independent and uses the delta method:
///   SE(mu)^2 = sum_j w_j^2 SE(mu_j)^2 + sum_j (mu_j - mu)^2 SE(w_j)^2
/// (componentwise). `weight_se` may be empty, in which case the second term
/// is omitted.
CombinedEstimate combine(const ElementMeans& means, const Vector& w_hat, const Vector& weight_se = Vector());

struct WeightedSample {
  std::vector<std::size_t> index;  // record index in the DrawStore
  std::vector<double> mass;
};

/// Gives every post-burn-in draw in element j mass w_j / n_j (after dropping
/// negligible empty elements and renormalizing).
WeightedSample weighted_empirical(const DrawStore& draws, const Partition& partition, const Vector& w_hat);

/// Writes {w_hat, per_element: {n, mean, se}, combined: {mean, se}}.
void write_report_json(const std::filesystem::path& path, const CombinedEstimate& est);
CombinedEstimate read_report_json(const std::filesystem::path& path);

}  // namespace pmcmc
