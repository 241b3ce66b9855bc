#include "pmcmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pmcmc/combine.hpp"
#include "pmcmc/executor.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/samplers.hpp"

namespace pmcmc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

Discretization::Discretization(std::vector<Bin> bins) : bins_(std::move(bins)) {
  if (bins_.empty()) throw Error("Discretization: no bins");
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    if (!(bins_[i].lo < bins_[i].hi)) throw Error("Discretization: bin edges must be increasing");
    if (i > 0 && bins_[i].lo < bins_[i - 1].hi) throw Error("Discretization: bins overlap or are unordered");
  }
}

Discretization Discretization::from_edges(const std::vector<double>& edges) {
  if (edges.empty()) throw Error("Discretization: no edges");
  std::vector<Bin> bins;
  bins.push_back({-kInf, edges.front()});
  for (std::size_t i = 1; i < edges.size(); ++i) bins.push_back({edges[i - 1], edges[i]});
  bins.push_back({edges.back(), kInf});
  return Discretization(std::move(bins));
}

std::optional<std::size_t> Discretization::locate(double x) const {
  // First bin whose upper edge is >= x.
  auto it = std::lower_bound(bins_.begin(), bins_.end(), x, [](const Bin& b, double v) { return b.hi < v; });
  if (it == bins_.end() || !(x > it->lo)) return std::nullopt;
  return static_cast<std::size_t>(it - bins_.begin());
}

Discretization probit_one_bins() {
  std::vector<double> edges;
  for (int i = 0; i <= 50; ++i) edges.push_back(0.5 * i);
  return Discretization::from_edges(edges);
}

Discretization probit_eight_bins() {
  std::vector<Discretization::Bin> bins;
  bins.push_back({-kInf, 3.5});
  for (double lo = 3.5; lo < 15.0 - 1e-9; lo += 0.5) bins.push_back({lo, lo + 0.5});
  for (int lo = 16; lo < 25; ++lo) bins.push_back({static_cast<double>(lo), lo + 1.0});
  bins.push_back({25.0, kInf});
  return Discretization(std::move(bins));
}

Vector histogram(std::span<const double> values, std::span<const double> masses, const Discretization& d) {
  if (!masses.empty() && masses.size() != values.size())
    throw Error("histogram: values and masses differ in length");
  Vector h = Vector::Zero(static_cast<Eigen::Index>(d.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double m = masses.empty() ? 1.0 : masses[i];
    total += m;
    if (auto b = d.locate(values[i])) h[static_cast<Eigen::Index>(*b)] += m;
  }
  if (total > 0.0) h /= total;
  return h;
}

double tv_distance(const Vector& p, const Vector& q) {
  check_dim("tv_distance", p.size(), q.size());
  return 0.5 * (p - q).cwiseAbs().sum();
}

double tv_distance(std::span<const double> a, std::span<const double> a_masses, std::span<const double> b,
                   const Discretization& d) {
  return tv_distance(histogram(a, a_masses, d), histogram(b, {}, d));
}

double lag_autocorrelation(std::span<const double> series, std::size_t lag) {
  const auto n = series.size();
  if (n <= lag) throw Error("lag_autocorrelation: series shorter than lag + 1");
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  if (denom == 0.0) {
    if (lag == 0) return 1.0;
    throw Error("lag_autocorrelation: constant series");
  }
  double num = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) num += (series[t] - mean) * (series[t + lag] - mean);
  return num / denom;
}

double batch_means_se(std::span<const double> series, int batches) {
  const auto n = series.size();
  const auto b = static_cast<std::size_t>(batches);
  if (n < 2 || batches < 2) return kNaN;
  if (n < 2 * b) {
    const double m = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : series) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  const std::size_t size = n / b;
  std::vector<double> means(b, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t i = k * size; i < (k + 1) * size; ++i) means[k] += series[i];
    means[k] /= static_cast<double>(size);
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(b);
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

ConvergenceTrace iterations_to_threshold(std::span<const double> stream, const Vector& reference,
                                         const Discretization& d, double threshold, std::int64_t every) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("iterations_to_threshold: threshold must lie in (0, 1]");
  if (every < 1) throw Error("iterations_to_threshold: checkpoint spacing must be positive");
  check_dim("iterations_to_threshold reference", static_cast<Eigen::Index>(d.size()), reference.size());
  ConvergenceTrace trace;
  Vector counts = Vector::Zero(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (auto b = d.locate(stream[i])) counts[static_cast<Eigen::Index>(*b)] += 1.0;
    const auto k = static_cast<std::int64_t>(i + 1);
    // Checkpoints at multiples of `every`; a stream shorter than one block
    // still gets a single point at its end.
    if (k % every == 0 || (i + 1 == stream.size() && trace.points.empty())) {
      const double tv = tv_distance(counts / static_cast<double>(k), reference);
      trace.points.push_back({k, tv});
      if (!trace.reached && tv <= threshold) trace.reached = k;
    }
  }
  return trace;
}

ConvergenceTrace combined_convergence(const DrawStore& draws, const Partition& partition, const Vector& w_hat,
                                      int coordinate, const Vector& reference, const Discretization& d,
                                      double threshold, std::int64_t every) {
  if (coordinate < 0 || coordinate >= draws.dim()) throw Error("combined_convergence: coordinate out of range");
  check_dim("combined_convergence weights", partition.size(), w_hat.size());
  const auto J = static_cast<std::size_t>(partition.size());
  const auto B = static_cast<Eigen::Index>(d.size());

  std::vector<std::size_t> order;
  order.reserve(draws.post_burnin_count());
  for (std::size_t i = 0; i < draws.size(); ++i)
    if (!draws.is_burnin(i)) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return draws.iter(a) < draws.iter(b); });

  std::vector<double> count(J, 0.0);
  Matrix bins = Matrix::Zero(B, static_cast<Eigen::Index>(J));
  ConvergenceTrace trace;
  auto evaluate = [&](std::int64_t k) {
    double total = 0.0;
    bool defined = true;
    for (std::size_t j = 0; j < J; ++j) {
      if (count[j] > 0.0) {
        total += w_hat[static_cast<Eigen::Index>(j)];
      } else if (w_hat[static_cast<Eigen::Index>(j)] > kEmptyElementThreshold) {
        defined = false;
      }
    }
    double tv = kNaN;
    if (defined && total > 0.0) {
      Vector h = Vector::Zero(B);
      for (std::size_t j = 0; j < J; ++j)
        if (count[j] > 0.0)
          h += (w_hat[static_cast<Eigen::Index>(j)] / total / count[j]) * bins.col(static_cast<Eigen::Index>(j));
      tv = tv_distance(h, reference);
      if (!trace.reached && tv <= threshold) trace.reached = k;
    }
    trace.points.push_back({k, tv});
  };

  const std::int64_t last = order.empty() ? 0 : draws.iter(order.back());
  std::int64_t next = every;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    while (draws.iter(i) > next) {
      evaluate(next);
      next += every;
    }
    const Vector x = draws.theta(i);
    const auto j = static_cast<std::size_t>(partition.assign(x));
    count[j] += 1.0;
    if (auto b = d.locate(x[coordinate])) bins(static_cast<Eigen::Index>(*b), static_cast<Eigen::Index>(j)) += 1.0;
  }
  while (next <= last) {
    evaluate(next);
    next += every;
  }
  if (trace.points.empty() && last > 0) evaluate(last);
  return trace;
}

std::vector<double> probit_rejection_reference(const ProbitModel& model, std::size_t n, Rng& rng) {
  if (model.dim() != 1) throw Error("probit_rejection_reference: only one-covariate models are supported");
  auto loglik = [&](double b) { return model.log_likelihood(Vector::Constant(1, b)); };
  // The probit log-likelihood is concave; bracket its maximum on a
  // geometric grid, then refine by golden-section search.
  double best_b = 0.0;
  double best = loglik(0.0);
  for (int k = -6; k <= 10; ++k)
    for (double s : {-1.0, 1.0}) {
      const double b = s * std::ldexp(1.0, k);
      const double v = loglik(b);
      if (v > best) {
        best = v;
        best_b = b;
      }
    }
  double lo = best_b - std::max(1.0, std::abs(best_b));
  double hi = best_b + std::max(1.0, std::abs(best_b));
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (loglik(a) < loglik(b)) lo = a; else hi = b;
  }
  best = std::max(best, loglik(0.5 * (lo + hi)));

  const double sd = std::sqrt(model.prior_variance()[0]);
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const double b = sd * rng.normal();
    if (std::log(rng.uniform()) < loglik(b) - best) out.push_back(b);
  }
  return out;
}

Matrix mixture_reference(const GaussianMixture& mixture, std::size_t n, Rng& rng) {
  Matrix out(static_cast<Eigen::Index>(n), mixture.dim());
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = mixture.sample(rng).transpose();
  return out;
}

DrawStore long_run_reference(const Target& target, const Vector& start, const Matrix& proposal_covariance,
                             std::int64_t iterations_per_chain, std::int64_t burn_in, int chains, int workers,
                             std::uint64_t seed) {
  std::vector<ChainConfig> cfgs;
  for (int c = 0; c < chains; ++c) {
    ChainConfig cfg;
    cfg.kernel = Kernel::kRwm;
    cfg.chain_id = c;
    cfg.step_scale = 2.38 / std::sqrt(static_cast<double>(target.dim));
    cfg.iterations = iterations_per_chain;
    cfg.burn_in = burn_in;
    cfg.seed = derive_seed(seed, StreamDomain::kReference, static_cast<std::uint64_t>(c));
    cfg.init = start;
    cfg.adapt = true;
    cfg.adapt_window = std::min<std::int64_t>(burn_in, 1000);
    cfg.proposal_covariance = proposal_covariance;
    cfgs.push_back(std::move(cfg));
  }
  return run_parallel_chains(target, cfgs, workers);
}

Vector element_occupancy(const Partition& partition, const Matrix& points) {
  Vector occ = Vector::Zero(partition.size());
  for (Eigen::Index i = 0; i < points.rows(); ++i) occ[partition.assign(points.row(i).transpose())] += 1.0;
  if (points.rows() > 0) occ /= static_cast<double>(points.rows());
  return occ;
}

Vector component_weights(const Partition& partition, const Vector& w_hat, const GaussianMixture& mixture) {
  check_dim("component_weights", partition.size(), w_hat.size());
  check_dim("component_weights", partition.dim(), mixture.dim());
  Vector out = Vector::Zero(mixture.components());
  for (int j = 0; j < partition.size(); ++j) {
    const Vector c = partition.center_original(j);
    int best = 0;
    for (int k = 1; k < mixture.components(); ++k)
      if ((mixture.means()[k] - c).squaredNorm() < (mixture.means()[best] - c).squaredNorm()) best = k;
    out[best] += w_hat[j];
  }
  return out;
}

void write_reference_csv(const std::filesystem::path& path, const Matrix& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (Eigen::Index j = 0; j < points.cols(); ++j) out << (j ? "," : "") << "theta_" << (j + 1);
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) out << (j ? "," : "") << points(i, j);
    out << '\n';
  }
}

Matrix read_reference_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read reference " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  const auto p = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  if (line.rfind("theta_1", 0) != 0) throw Error(path.string() + ": expected header theta_1..theta_p");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index cols = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != p) throw Error(path.string() + ": ragged row");
  }
  Matrix out(static_cast<Eigen::Index>(values.size()) / p, p);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) out(i, j) = values[static_cast<std::size_t>(i * p + j)];
  return out;
}

}  // namespace pmcmc
