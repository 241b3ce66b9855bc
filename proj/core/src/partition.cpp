#include "pmcmc/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pmcmc/special.hpp"

namespace pmcmc {

std::string to_string(Transform t) { return t == Transform::kLogistic ? "logistic" : "identity"; }

Transform transform_from_string(const std::string& s) {
  if (s == "identity") return Transform::kIdentity;
  if (s == "logistic") return Transform::kLogistic;
  throw Error("unknown transform '" + s + "' (expected identity or logistic)");
}

namespace {

Vector apply_transform(Transform t, const Vector& x) {
  if (t == Transform::kIdentity) return x;
  return x.unaryExpr([](double v) { return logistic(v); });
}

Vector invert_transform(Transform t, const Vector& y) {
  if (t == Transform::kIdentity) return y;
  return y.unaryExpr([](double v) { return logit(v); });
}

}  // namespace

Partition::Partition(std::vector<Vector> centers, Vector normalization, Transform transform,
                     double epsilon2, double alpha)
    : centers_(std::move(centers)),
      normalization_(std::move(normalization)),
      transform_(transform),
      epsilon2_(epsilon2),
      alpha_(alpha) {
  if (centers_.empty()) throw Error("Partition: need at least one center");
  for (const auto& c : centers_) {
    check_dim("Partition center", normalization_.size(), c.size());
    if (!c.allFinite()) throw Error("Partition: non-finite center");
  }
  if ((normalization_.array() <= 0.0).any() || !normalization_.allFinite())
    throw Error("Partition: normalization scales must be positive");
  for (std::size_t a = 0; a < centers_.size(); ++a)
    for (std::size_t b = a + 1; b < centers_.size(); ++b)
      if (centers_[a] == centers_[b]) throw Error("Partition: centers must be pairwise distinct");
}

Partition Partition::from_original_centers(const std::vector<Vector>& centers, Transform transform,
                                           std::optional<Vector> normalization, double epsilon2,
                                           double alpha) {
  if (centers.empty()) throw Error("Partition: need at least one center");
  const Vector scale = normalization.value_or(Vector::Ones(centers.front().size()));
  std::vector<Vector> mapped;
  for (const auto& c : centers) {
    check_dim("Partition center", scale.size(), c.size());
    mapped.push_back(apply_transform(transform, c).cwiseQuotient(scale));
  }
  return Partition(std::move(mapped), scale, transform, epsilon2, alpha);
}

Vector Partition::to_cluster_coords(const Vector& theta) const {
  check_dim("Partition::assign", normalization_.size(), theta.size());
  return apply_transform(transform_, theta).cwiseQuotient(normalization_);
}

Vector Partition::center_original(int j) const {
  return invert_transform(transform_, centers_.at(static_cast<std::size_t>(j)).cwiseProduct(normalization_));
}

int Partition::assign(const Vector& theta) const {
  if (!theta.allFinite()) throw Error("Partition::assign: non-finite point");
  return assign_cluster_coords(to_cluster_coords(theta));
}

int Partition::assign_cluster_coords(const Vector& y) const {
  int best = 0;
  double best_d = (centers_[0] - y).squaredNorm();
  for (std::size_t j = 1; j < centers_.size(); ++j) {
    const double d = (centers_[j] - y).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

Partition cluster(const Matrix& points, const ClusterOptions& opts) {
  if (points.rows() == 0) throw Error("cluster: no draws");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw Error("cluster: alpha must lie in (0, 1)");
  if (!(opts.epsilon2 > 0.0)) throw Error("cluster: epsilon^2 must be positive");
  if (opts.max_points < 1) throw Error("cluster: max_points must be positive");
  const Eigen::Index p = points.cols();

  Matrix y(points.rows(), p);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    y.row(i) = apply_transform(opts.transform, points.row(i).transpose()).transpose();
  if (!y.allFinite()) throw Error("cluster: non-finite draws");

  Vector scale = Vector::Ones(p);
  if (opts.normalize) {
    const Vector mean = y.colwise().mean();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double var = (y.col(j).array() - mean[j]).square().sum() /
                         std::max<double>(1.0, static_cast<double>(y.rows() - 1));
      scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }

  // Evenly spaced thinning keeps the O(n^2) neighbour counts affordable.
  const auto total = static_cast<std::size_t>(y.rows());
  const std::size_t n = std::min(total, opts.max_points);
  std::vector<double> pts(n * static_cast<std::size_t>(p));
  for (std::size_t k = 0; k < n; ++k) {
    const auto src = static_cast<Eigen::Index>(total == n ? k : (k * total) / n);
    for (Eigen::Index j = 0; j < p; ++j) pts[k * static_cast<std::size_t>(p) + static_cast<std::size_t>(j)] = y(src, j) / scale[j];
  }
  auto dist2 = [&](std::size_t a, std::size_t b) {
    const double* pa = pts.data() + a * static_cast<std::size_t>(p);
    const double* pb = pts.data() + b * static_cast<std::size_t>(p);
    double s = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double d = pa[j] - pb[j];
      s += d * d;
    }
    return s;
  };

  std::vector<std::int64_t> density(n, 1);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (dist2(a, b) <= opts.epsilon2) {
        ++density[a];
        ++density[b];
      }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return density[a] > density[b]; });

  const auto needed = static_cast<std::size_t>(std::ceil((1.0 - opts.alpha) * static_cast<double>(n) - 1e-9));
  std::vector<bool> clustered(n, false);
  std::size_t n_clustered = 0;
  std::vector<Vector> centers;
  for (std::size_t idx : order) {
    if (n_clustered >= needed) break;
    if (clustered[idx]) continue;
    Vector c(p);
    for (Eigen::Index j = 0; j < p; ++j) c[j] = pts[idx * static_cast<std::size_t>(p) + static_cast<std::size_t>(j)];
    for (std::size_t b = 0; b < n; ++b)
      if (!clustered[b] && dist2(idx, b) <= opts.epsilon2) {
        clustered[b] = true;
        ++n_clustered;
      }
    centers.push_back(std::move(c));
  }
  return Partition(std::move(centers), scale, opts.transform, opts.epsilon2, opts.alpha);
}

Partition cluster(const DrawStore& draws, const ClusterOptions& opts) {
  return cluster(draws.post_burnin_matrix(), opts);
}

double covered_fraction(const Partition& partition, const Matrix& points) {
  if (points.rows() == 0) return 1.0;
  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vector yi = partition.to_cluster_coords(points.row(i).transpose());
    for (const auto& c : partition.centers())
      if ((c - yi).squaredNorm() <= partition.epsilon2()) {
        ++covered;
        break;
      }
  }
  return static_cast<double>(covered) / static_cast<double>(points.rows());
}

Partition quantile_partition(const DrawStore& draws, const std::vector<double>& probs) {
  if (draws.dim() != 1) throw Error("quantile_partition: only defined for one-dimensional draws");
  if (probs.empty()) throw Error("quantile_partition: no quantile levels");
  std::vector<double> v;
  v.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i)
    if (!draws.is_burnin(i)) v.push_back(draws.theta(i)[0]);
  if (v.empty()) throw Error("quantile_partition: no post-burn-in draws");
  std::sort(v.begin(), v.end());
  std::vector<Vector> centers;
  for (double q : probs) {
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile_partition: levels must lie in [0, 1]");
    // Type-7 (linear interpolation) sample quantile.
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double c = v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
    if (centers.empty() || centers.back()[0] != c) centers.push_back(Vector::Constant(1, c));
  }
  return Partition::from_original_centers(centers);
}

std::vector<int> assign_all(const Partition& partition, const DrawStore& draws) {
  check_dim("assign_all", partition.dim(), draws.dim());
  std::vector<int> out(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) out[i] = partition.assign(draws.theta(i));
  return out;
}

std::vector<std::int64_t> element_counts(const Partition& partition, const DrawStore& draws) {
  check_dim("element_counts", partition.dim(), draws.dim());
  std::vector<std::int64_t> counts(static_cast<std::size_t>(partition.size()), 0);
  for (std::size_t i = 0; i < draws.size(); ++i)
    if (!draws.is_burnin(i)) ++counts[static_cast<std::size_t>(partition.assign(draws.theta(i)))];
  return counts;
}

void write_partition_json(const std::filesystem::path& path, const Partition& partition) {
  nlohmann::json j;
  j["centers"] = nlohmann::json::array();
  for (const auto& c : partition.centers())
    j["centers"].push_back(std::vector<double>(c.data(), c.data() + c.size()));
  j["epsilon2"] = partition.epsilon2();
  j["alpha"] = partition.alpha();
  const auto& s = partition.normalization();
  j["normalization"] = std::vector<double>(s.data(), s.data() + s.size());
  j["transform"] = to_string(partition.transform());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Partition read_partition_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read partition " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    std::vector<Vector> centers;
    for (const auto& c : j.at("centers")) {
      const auto v = c.get<std::vector<double>>();
      centers.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    const auto s = j.at("normalization").get<std::vector<double>>();
    return Partition(std::move(centers), Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size())),
                     transform_from_string(j.at("transform").get<std::string>()),
                     j.at("epsilon2").get<double>(), j.at("alpha").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": partition schema mismatch: " + e.what());
  }
}

}  // namespace pmcmc
