#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pmcmc/draws.hpp"
#include "pmcmc/types.hpp"

namespace pmcmc {

/// Coordinate map applied before clustering and assignment.
enum class Transform { kIdentity, kLogistic };

std::string to_string(Transform t);
Transform transform_from_string(const std::string& s);

/// Voronoi partition of R^p. Centers live in clustering coordinates: the
/// transformed point divided componentwise by `normalization`.
class Partition {
 public:
  Partition(std::vector<Vector> centers, Vector normalization, Transform transform,
            double epsilon2, double alpha);

  /// Builds a partition from centers given in the original space.
  static Partition from_original_centers(const std::vector<Vector>& centers,
                                         Transform transform = Transform::kIdentity,
                                         std::optional<Vector> normalization = std::nullopt,
                                         double epsilon2 = 0.0, double alpha = 0.0);

  int size() const { return static_cast<int>(centers_.size()); }
  int dim() const { return static_cast<int>(normalization_.size()); }
  const std::vector<Vector>& centers() const { return centers_; }
  const Vector& normalization() const { return normalization_; }
  Transform transform() const { return transform_; }
  double epsilon2() const { return epsilon2_; }
  double alpha() const { return alpha_; }

  Vector to_cluster_coords(const Vector& theta) const;
  Vector center_original(int j) const;

  /// Index of the nearest center; ties go to the lowest index.
  int assign(const Vector& theta) const;
  int assign_cluster_coords(const Vector& y) const;

 private:
  std::vector<Vector> centers_;
  Vector normalization_;
  Transform transform_;
  double epsilon2_;
  double alpha_;
};

struct ClusterOptions {
  double epsilon2 = 1.0;
  double alpha = 0.01;
  bool normalize = false;
  Transform transform = Transform::kIdentity;
  /// Larger inputs are thinned to this many evenly spaced points.
  std::size_t max_points = 10000;
};

/// Greedy covering: repeatedly take the unclustered point with the most
/// neighbours within epsilon (ties to the earliest point), make it a center
/// and absorb every unclustered point within epsilon of it, until at least
/// (1 - alpha) of the points are clustered. Rows of `points` are draws.
Partition cluster(const Matrix& points, const ClusterOptions& opts);
/// Clusters the post-burn-in records of `draws`.
Partition cluster(const DrawStore& draws, const ClusterOptions& opts);

/// Fraction of rows of `points` within epsilon of some center, measured in
/// clustering coordinates.
double covered_fraction(const Partition& partition, const Matrix& points);

/// 1-d partition with centers at the given quantiles of the post-burn-in draws.
Partition quantile_partition(const DrawStore& draws, const std::vector<double>& probs);

/// Element index of every record (burn-in records included).
std::vector<int> assign_all(const Partition& partition, const DrawStore& draws);
/// n_j over post-burn-in records.
std::vector<std::int64_t> element_counts(const Partition& partition, const DrawStore& draws);

void write_partition_json(const std::filesystem::path& path, const Partition& partition);
Partition read_partition_json(const std::filesystem::path& path);

}  // namespace pmcmc
