#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "pmcmc/config.hpp"
#include "pmcmc/diagnostics.hpp"
#include "pmcmc/executor.hpp"
#include "pmcmc/partition.hpp"
#include "pmcmc/pipeline.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/special.hpp"
#include "pmcmc/targets.hpp"
#include "support.hpp"

using namespace pmcmc;
namespace fs = std::filesystem;

namespace {

Matrix blobs(const std::vector<Vector>& means, int per_blob, double sd, Rng& rng) {
  const auto p = means.front().size();
  Matrix out(static_cast<Eigen::Index>(means.size()) * per_blob, p);
  Eigen::Index r = 0;
  for (const auto& m : means)
    for (int i = 0; i < per_blob; ++i) out.row(r++) = (m + sd * rng.normal_vector(p)).transpose();
  return out;
}

int brute_force_nearest(const std::vector<Vector>& centers, const Vector& y) {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    double d = 0.0;
    for (Eigen::Index k = 0; k < y.size(); ++k) d += (centers[j][k] - y[k]) * (centers[j][k] - y[k]);
    if (best < 0 || d < best_d) {
      best = static_cast<int>(j);
      best_d = d;
    }
  }
  return best;
}

DrawStore as_draws(const Matrix& m) {
  DrawStore d(static_cast<int>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) d.append(0, i + 1, m.row(i).transpose(), false);
  return d;
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("identical points give a single element") {
  const Matrix pts = Matrix::Constant(500, 2, 1.5);
  ClusterOptions opts;
  opts.epsilon2 = 0.1;
  opts.alpha = 0.05;
  const auto part = cluster(pts, opts);
  CHECK(part.size() == 1);
  CHECK(part.center_original(0) == Vector::Constant(2, 1.5));
}

TEST_CASE("two separated blobs give two elements") {
  Rng rng(1);
  const Matrix pts = blobs({Vector{{-10.0, 0.0}}, Vector{{10.0, 0.0}}}, 1000, 0.5, rng);
  ClusterOptions opts;
  opts.epsilon2 = 16.0;
  opts.alpha = 0.01;
  const auto part = cluster(pts, opts);
  REQUIRE(part.size() == 2);
  CHECK(part.assign(Vector{{-10.0, 0.0}}) != part.assign(Vector{{10.0, 0.0}}));
  for (int j = 0; j < 2; ++j) CHECK(std::abs(std::abs(part.center_original(j)[0]) - 10.0) < 2.0);
}

TEST_CASE("cluster coverage reaches 1 - alpha") {
  Rng rng(2);
  const Matrix pts = mixture_reference(four_mode_mixture(), 4000, rng);
  for (double alpha : {0.01, 0.05, 0.2}) {
    ClusterOptions opts;
    opts.epsilon2 = 4.0;
    opts.alpha = alpha;
    const auto part = cluster(pts, opts);
    CHECK(covered_fraction(part, pts) >= 1.0 - alpha);
  }
}

TEST_CASE("clustering early mixture chain draws gives a handful of elements") {
  // Ten Langevin chains from the bundled mixture setup, first 1000
  // post-burn-in draws each.
  auto cfg = load_config(fs::path(PMCMC_SOURCE_DIR) / "configs" / "mixture2d.cfg");
  cfg.chains.iterations = cfg.chains.burn_in + 1000;
  const auto mixture = four_mode_mixture();
  const auto draws = run_parallel_chains(mixture.as_target(), chain_configs(cfg, 2), 1);
  ClusterOptions opts;
  opts.epsilon2 = 9.0;
  opts.alpha = 0.01;
  const auto part = cluster(draws.first_post_burnin(1000), opts);
  CHECK(part.size() >= 4);
  CHECK(part.size() <= 10);
}

TEST_CASE("element membership is invariant to input order") {
  Rng rng(4);
  const Matrix pts = blobs({Vector{{0.0, 0.0}}, Vector{{20.0, 0.0}}, Vector{{0.0, 20.0}}}, 300, 0.3, rng);
  ClusterOptions opts;
  opts.epsilon2 = 25.0;
  opts.alpha = 0.01;
  const auto a = cluster(pts, opts);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(pts.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937 g(5);
  std::shuffle(perm.begin(), perm.end(), g);
  Matrix shuffled(pts.rows(), pts.cols());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) shuffled.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
  const auto b = cluster(shuffled, opts);
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index k = i + 1; k < pts.rows(); k += 37) {
      const Vector xi = pts.row(i).transpose(), xk = pts.row(k).transpose();
      CHECK((a.assign(xi) == a.assign(xk)) == (b.assign(xi) == b.assign(xk)));
    }
}

TEST_CASE("assignment matches brute force on random points") {
  Rng rng(6);
  std::vector<Vector> centers;
  for (int j = 0; j < 17; ++j) centers.push_back(5.0 * rng.normal_vector(3));
  const Partition part(centers, Vector::Ones(3), Transform::kIdentity, 1.0, 0.01);
  int mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    const Vector y = 6.0 * rng.normal_vector(3);
    mismatches += part.assign(y) != brute_force_nearest(centers, y);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("ties go to the lowest index") {
  const auto part = Partition::from_original_centers({Vector{{0.0, 0.0}}, Vector{{2.0, 0.0}}, Vector{{1.0, 5.0}}});
  CHECK(part.assign(Vector{{1.0, 0.0}}) == 0);
  CHECK(part.assign(Vector{{1.0, -3.0}}) == 0);
  const auto swapped = Partition::from_original_centers({Vector{{2.0, 0.0}}, Vector{{0.0, 0.0}}});
  CHECK(swapped.assign(Vector{{1.0, 0.0}}) == 0);
}

TEST_CASE("assignment rejects bad input") {
  const auto part = Partition::from_original_centers({Vector{{0.0, 0.0}}, Vector{{2.0, 0.0}}});
  CHECK_THROWS(part.assign(Vector{{std::nan(""), 0.0}}));
  CHECK_THROWS_AS(part.assign(Vector::Zero(3)), DimensionError);
  CHECK_THROWS(Partition::from_original_centers({Vector{{1.0}}, Vector{{1.0}}}));
  CHECK_THROWS(Partition::from_original_centers({}));
}

TEST_CASE("element counts sum to the post-burn-in total") {
  Rng rng(7);
  DrawStore d(2);
  for (int i = 1; i <= 1000; ++i) d.append(0, i, 3.0 * rng.normal_vector(2), i <= 100);
  const auto part = Partition::from_original_centers({Vector{{-1.0, 0.0}}, Vector{{1.0, 0.0}}, Vector{{0.0, 3.0}}});
  const auto counts = element_counts(part, d);
  CHECK(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) == 900);
  const auto labels = assign_all(part, d);
  CHECK(labels.size() == 1000);
  std::vector<std::int64_t> recount(3, 0);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!d.is_burnin(i)) ++recount[static_cast<std::size_t>(labels[i])];
  CHECK(recount == counts);
}

TEST_CASE("normalized clustering divides by the sample standard deviation") {
  Rng rng(8);
  Matrix pts(2000, 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << 100.0 * rng.normal(), 0.01 * rng.normal();
  ClusterOptions opts;
  opts.epsilon2 = 1.0;
  opts.alpha = 0.05;
  opts.normalize = true;
  const auto part = cluster(pts, opts);
  const Vector sd{{std::sqrt(testing::variance(std::vector<double>(pts.col(0).data(), pts.col(0).data() + 2000))),
                   std::sqrt(testing::variance(std::vector<double>(pts.col(1).data(), pts.col(1).data() + 2000)))}};
  CHECK((part.normalization() - sd).cwiseAbs().maxCoeff() < 1e-10 * sd.maxCoeff());
  CHECK(covered_fraction(part, pts) >= 0.95);
}

TEST_CASE("logistic transform clusters on the probability scale") {
  Rng rng(9);
  Matrix pts(1000, 1);
  for (Eigen::Index i = 0; i < 500; ++i) pts(i, 0) = logit(0.2 + 0.01 * rng.normal());
  for (Eigen::Index i = 500; i < 1000; ++i) pts(i, 0) = logit(0.8 + 0.01 * rng.normal());
  ClusterOptions opts;
  opts.epsilon2 = 0.01;
  opts.alpha = 0.01;
  opts.transform = Transform::kLogistic;
  const auto part = cluster(pts, opts);
  REQUIRE(part.size() == 2);
  for (int j = 0; j < 2; ++j) {
    const double c = part.centers()[static_cast<std::size_t>(j)][0];
    CHECK((std::abs(c - 0.2) < 0.05 || std::abs(c - 0.8) < 0.05));
    CHECK(logistic(part.center_original(j)[0]) == doctest::Approx(c).epsilon(1e-12));
  }
  CHECK(part.assign(Vector::Constant(1, 50.0)) == part.assign(Vector::Constant(1, logit(0.8))));
}

TEST_CASE("quantile partition uses type-7 sample quantiles") {
  Rng rng(10);
  std::vector<double> v(1001);
  for (auto& x : v) x = rng.normal();
  DrawStore d(1);
  for (std::size_t i = 0; i < v.size(); ++i) d.append(0, static_cast<std::int64_t>(i + 1), Vector::Constant(1, v[i]), false);
  d.append(0, 5000, Vector::Constant(1, 1e9), false);
  v.push_back(1e9);
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const auto part = quantile_partition(d, probs);
  REQUIRE(part.size() == 9);
  std::sort(v.begin(), v.end());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double h = probs[k] * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const double expected = v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
    CHECK(part.center_original(static_cast<int>(k))[0] == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK_THROWS(quantile_partition(as_draws(Matrix::Zero(10, 2)), probs));
}

TEST_CASE("quantile partition merges repeated centers") {
  const auto part = quantile_partition(as_draws(Matrix::Constant(50, 1, 2.0)), {0.25, 0.5, 0.75});
  CHECK(part.size() == 1);
}

TEST_CASE("cluster input validation") {
  ClusterOptions opts;
  CHECK_THROWS(cluster(Matrix(0, 2), opts));
  opts.alpha = 0.0;
  CHECK_THROWS(cluster(Matrix::Zero(4, 2), opts));
  opts.alpha = 0.1;
  opts.epsilon2 = 0.0;
  CHECK_THROWS(cluster(Matrix::Zero(4, 2), opts));
}

TEST_CASE("partition JSON round-trip") {
  Rng rng(11);
  std::vector<Vector> centers;
  for (int j = 0; j < 5; ++j) centers.push_back(rng.normal_vector(4) / 3.0);
  const Partition part(centers, Vector{{1.0, 0.5, 2.0, 1.0 / 7.0}}, Transform::kLogistic, 0.3, 0.05);
  const auto dir = fs::temp_directory_path() / "pmcmc_unit";
  fs::create_directories(dir);
  write_partition_json(dir / "partition.json", part);
  const auto back = read_partition_json(dir / "partition.json");
  CHECK(back.centers() == part.centers());
  CHECK(back.normalization() == part.normalization());
  CHECK(back.transform() == Transform::kLogistic);
  CHECK(back.epsilon2() == 0.3);
  CHECK(back.alpha() == 0.05);
  {
    std::ofstream out(dir / "bad_partition.json");
    out << R"({"centers": [[1.0]], "alpha": 0.1})";
  }
  CHECK_THROWS_AS(read_partition_json(dir / "bad_partition.json"), Error);
}

}  // TEST_SUITE
