#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pmcmc/types.hpp"

namespace pmcmc {

/// Pooled chain output: (chain id, iteration, theta, burn-in flag) records.
///
/// Storage is columnar so theta rows are contiguous. Iterations are strictly
/// increasing within each chain.
class DrawStore {
 public:
  explicit DrawStore(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return chain_.size(); }
  bool empty() const { return chain_.empty(); }

  void reserve(std::size_t n);
  void append(int chain, std::int64_t iter, const Vector& theta, bool burnin);

  Eigen::Map<const Vector> theta(std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(dim_), dim_};
  }
  int chain(std::size_t i) const { return chain_[i]; }
  std::int64_t iter(std::size_t i) const { return iter_[i]; }
  bool is_burnin(std::size_t i) const { return burnin_[i] != 0; }

  std::size_t post_burnin_count() const;
  std::vector<int> chain_ids() const;

  /// Appends every record of `other`; dimensions must agree. With sort=false
  /// the caller must call canonical_sort() before relying on record order.
  void merge(const DrawStore& other, bool sort = true);
  /// Orders records by (chain id, iteration). Reductions over a sorted store
  /// are independent of the order in which chains finished.
  void canonical_sort();

  /// Post-burn-in records only.
  DrawStore post_burnin() const;
  /// Records with iteration <= max_iter (burn-in flags kept).
  DrawStore prefix(std::int64_t max_iter) const;
  /// The first `per_chain` post-burn-in records of each chain.
  DrawStore first_post_burnin(std::int64_t per_chain) const;
  /// Post-burn-in thetas as rows.
  Matrix post_burnin_matrix() const;

  /// Optional per-dimension scale recorded alongside the draws.
  std::optional<Vector> normalization;

  bool operator==(const DrawStore& o) const {
    return dim_ == o.dim_ && chain_ == o.chain_ && iter_ == o.iter_ && burnin_ == o.burnin_ &&
           values_ == o.values_;
  }

 private:
  int dim_;
  std::vector<int> chain_;
  std::vector<std::int64_t> iter_;
  std::vector<std::uint8_t> burnin_;
  std::vector<double> values_;
  std::map<int, std::int64_t> last_iter_;
};

/// Writes `chain,iter,theta_1..theta_p,is_burnin`. Doubles use the shortest
/// representation that round-trips exactly.
void write_draws_csv(const std::filesystem::path& path, const DrawStore& draws);
DrawStore read_draws_csv(const std::filesystem::path& path);
/// Reads and merges several files (e.g. one per chain or per host).
DrawStore read_draws_csv(std::span<const std::filesystem::path> paths);

}  // namespace pmcmc
