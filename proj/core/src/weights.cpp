#include "pmcmc/weights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pmcmc/diagnostics.hpp"
#include "pmcmc/executor.hpp"
#include "pmcmc/log.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/special.hpp"

namespace pmcmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::string to_string(Location l) {
  switch (l) {
    case Location::kClusterCenter: return "cluster_center";
    case Location::kEmpiricalMode: return "empirical_mode";
    case Location::kEmpiricalMean: return "empirical_mean";
    case Location::kHessianMode: return "hessian_mode";
  }
  return "cluster_center";
}

Location location_from_string(const std::string& s) {
  if (s == "cluster_center") return Location::kClusterCenter;
  if (s == "empirical_mode") return Location::kEmpiricalMode;
  if (s == "empirical_mean") return Location::kEmpiricalMean;
  if (s == "hessian_mode") return Location::kHessianMode;
  throw Error("unknown instrumental location '" + s + "'");
}

std::string to_string(WeightMethod m) { return m == WeightMethod::kRatio ? "ratio" : "pseudo_marginal"; }

WeightMethod weight_method_from_string(const std::string& s) {
  if (s == "ratio") return WeightMethod::kRatio;
  if (s == "pseudo_marginal") return WeightMethod::kPseudoMarginal;
  throw Error("unknown weight method '" + s + "' (expected ratio or pseudo_marginal)");
}

std::string to_string(ReplicateSampler s) { return s == ReplicateSampler::kIid ? "iid" : "trajectory"; }

ReplicateSampler replicate_sampler_from_string(const std::string& s) {
  if (s == "iid") return ReplicateSampler::kIid;
  if (s == "trajectory") return ReplicateSampler::kTrajectory;
  throw Error("unknown replicate sampler '" + s + "' (expected iid or trajectory)");
}

// ---------------------------------------------------------------------------
// Instrumentals

MvtDist fit_instrumental(const Matrix& element_draws, const InstrumentalOptions& opts,
                         const Target* target, const Vector* center) {
  const Eigen::Index n = element_draws.rows();
  const Eigen::Index p = element_draws.cols();
  if (n < p + 2)
    throw InsufficientDrawsError("fit_instrumental: element has " + std::to_string(n) +
                                 " draws, need at least " + std::to_string(p + 2) +
                                 "; explore it further or coarsen the partition");
  const Vector mean = element_draws.colwise().mean();
  const Matrix centered = element_draws.rowwise() - mean.transpose();
  Matrix S = centered.transpose() * centered / static_cast<double>(n - 1);
  S.diagonal().array() += 1e-8 * S.trace() / static_cast<double>(p);

  Vector location;
  switch (opts.location) {
    case Location::kClusterCenter:
      if (!center) throw Error("fit_instrumental: cluster_center needs the element center");
      location = *center;
      break;
    case Location::kEmpiricalMean:
      location = mean;
      break;
    case Location::kEmpiricalMode: {
      if (!target) throw Error("fit_instrumental: empirical_mode needs the target");
      double best = kNegInf;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = element_draws.row(i).transpose();
        const double lg = target->log_g(x);
        if (lg > best || location.size() == 0) {
          best = lg;
          location = x;
        }
      }
      break;
    }
    case Location::kHessianMode:
      if (!target || !center) throw Error("fit_instrumental: hessian_mode needs target and center");
      return laplace_instrumental(*target, *center, opts.nu, opts.inflation);
  }
  check_dim("fit_instrumental location", p, location.size());
  return MvtDist(std::move(location), std::move(S), opts.nu, opts.inflation);
}

MvtDist laplace_instrumental(const Target& target, const Vector& start, double nu, double inflation) {
  const Vector mode = find_mode(target, start);
  const Matrix H = finite_difference_hessian(target, mode);
  Eigen::LLT<Matrix> llt(-H);
  if (llt.info() != Eigen::Success)
    throw Error("laplace_instrumental: log density is not locally concave at the mode");
  const auto p = mode.size();
  return MvtDist(mode, llt.solve(Matrix::Identity(p, p)), nu, inflation);
}

// ---------------------------------------------------------------------------
// Importance-sampling estimates of c_j

double is_log_c_hat(const Target& target, const MvtDist& q, int element, const Partition& partition,
                    int T, Rng& rng) {
  if (T < 1) throw Error("is_c_hat: T must be >= 1");
  check_dim("is_c_hat", target.dim, q.dim());
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const Vector x = q.sample(rng);
    if (partition.assign(x) != element) continue;
    const double lg = target.log_g(x);
    if (lg == kNegInf) continue;
    terms.push_back(lg - q.log_density(x));
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(T));
}

double trajectory_log_c_hat(const Target& target, const MvtDist& q_center, int element,
                            const Partition& partition, const TrajectoryOptions& opts, Rng& rng) {
  const Trajectory tr = t4_trajectory(q_center, target, opts, rng);
  std::vector<double> terms;
  terms.reserve(tr.states.size());
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    const Vector& x = tr.states[t];
    if (!x.allFinite() || partition.assign(x) != element) continue;
    const double lg = target.log_g(x);
    if (lg == kNegInf) continue;
    terms.push_back(lg - tr.log_instrumental[t]);
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(tr.states.size()));
}

// ---------------------------------------------------------------------------
// Combining replicate estimates

Vector ratio_weights(const Matrix& c_hats) {
  if (c_hats.size() == 0) throw Error("ratio_weights: empty estimate matrix");
  if ((c_hats.array() < 0.0).any() || !c_hats.allFinite())
    throw Error("ratio_weights: estimates must be finite and non-negative");
  const Vector col = c_hats.colwise().sum().transpose();
  const double total = col.sum();
  if (!(total > 0.0)) throw Error("ratio_weights: all estimates are zero");
  return col / total;
}

Vector ratio_weights_log(const Matrix& log_c_hats) {
  double shift = kNegInf;
  for (Eigen::Index i = 0; i < log_c_hats.size(); ++i)
    if (std::isfinite(log_c_hats.data()[i])) shift = std::max(shift, log_c_hats.data()[i]);
  if (shift == kNegInf) throw Error("ratio_weights: all estimates are zero");
  return ratio_weights((log_c_hats.array() - shift).exp().matrix());
}

Vector pseudo_marginal_weights(const std::function<double(int, Rng&)>& log_c_hat_sampler, int J,
                               std::int64_t iters, Rng& rng, PseudoMarginalStats* stats) {
  if (J < 1) throw Error("pseudo_marginal_weights: need at least one element");
  if (iters < 1) throw Error("pseudo_marginal_weights: iters must be >= 1");
  if (J == 1) {
    if (stats) *stats = {1.0, Vector::Zero(1)};
    return Vector::Ones(1);
  }
  constexpr int kMaxRetries = 1000;
  int current = 0;
  double retained = log_c_hat_sampler(0, rng);
  std::vector<int> path;
  path.reserve(static_cast<std::size_t>(iters));
  std::int64_t accepted = 0;
  for (std::int64_t it = 0; it < iters; ++it) {
    int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(J)));
    double fresh = log_c_hat_sampler(k, rng);
    // A zero retained estimate means the chain has not yet found positive
    // mass; redraw the proposal until it does.
    for (int r = 0; retained == kNegInf && fresh == kNegInf; ++r) {
      if (r >= kMaxRetries)
        throw Error("pseudo_marginal_weights: every estimate is zero; instrumentals miss their elements");
      k = static_cast<int>(rng.below(static_cast<std::uint64_t>(J)));
      fresh = log_c_hat_sampler(k, rng);
    }
    if (retained == kNegInf || std::log(rng.uniform()) < fresh - retained) {
      current = k;
      retained = fresh;
      ++accepted;
    }
    path.push_back(current);
  }
  Vector occupancy = Vector::Zero(J);
  for (int s : path) occupancy[s] += 1.0;
  occupancy /= static_cast<double>(iters);
  if (stats) {
    stats->acceptance_rate = static_cast<double>(accepted) / static_cast<double>(iters);
    stats->se.resize(J);
    std::vector<double> indicator(path.size());
    for (int j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < path.size(); ++i) indicator[i] = path[i] == j ? 1.0 : 0.0;
      stats->se[j] = batch_means_se(indicator);
    }
  }
  return occupancy;
}

// ---------------------------------------------------------------------------
// Full estimation

Vector WeightEstimate::c_hat_mean() const { return c_hats.colwise().mean().transpose(); }

Vector WeightEstimate::c_hat_se() const {
  const auto n = static_cast<double>(c_hats.rows());
  if (n < 2) return Vector::Constant(c_hats.cols(), std::numeric_limits<double>::quiet_NaN());
  const Vector m = c_hat_mean();
  return ((c_hats.rowwise() - m.transpose()).array().square().colwise().sum().transpose() / (n - 1.0) / n)
      .sqrt()
      .matrix();
}

namespace {

std::uint64_t replicate_index(int element, std::int64_t i) {
  return (static_cast<std::uint64_t>(element) << 40) ^ static_cast<std::uint64_t>(i);
}

double one_replicate(const Target& target, const Partition& partition, const MvtDist& q, int element,
                     const WeightOptions& opts, Rng& rng) {
  if (opts.sampler == ReplicateSampler::kIid)
    return is_log_c_hat(target, q, element, partition, opts.T, rng);
  TrajectoryOptions t = opts.trajectory;
  t.length = opts.T;
  return trajectory_log_c_hat(target, q, element, partition, t, rng);
}

void check_tails(WeightEstimate& w) {
  // Replicate-level check on the support condition: a few replicates
  // carrying most of the mass signal an instrumental with light tails.
  const auto n = static_cast<std::size_t>(w.c_hats.rows());
  // Below 100 replicates the top 1% is a single value and the check says little.
  if (n < 100) return;
  const std::size_t top = std::max<std::size_t>(1, (n + 99) / 100);
  for (Eigen::Index j = 0; j < w.c_hats.cols(); ++j) {
    std::vector<double> v(w.c_hats.col(j).data(), w.c_hats.col(j).data() + n);
    std::sort(v.begin(), v.end(), std::greater<>());
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    const double head = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(top), 0.0);
    if (total > 0.0 && head > 0.5 * total) {
      const std::string msg = "element " + std::to_string(j) + ": top 1% of replicates carry " +
                              std::to_string(100.0 * head / total) +
                              "% of the estimate (max replicate " + std::to_string(v.front()) +
                              " x exp(" + std::to_string(w.log_scale) +
                              ")); the instrumental may have lighter tails than the target";
      w.warnings.push_back(msg);
      warn(msg);
    }
  }
}

}  // namespace

WeightEstimate estimate_weights(const Target& target, const Partition& partition,
                                const std::vector<MvtDist>& instrumentals, const WeightOptions& opts,
                                std::uint64_t seed, int workers) {
  const int J = partition.size();
  if (static_cast<int>(instrumentals.size()) != J)
    throw Error("estimate_weights: need one instrumental per partition element");
  if (opts.replicates < 1) throw Error("estimate_weights: need at least one replicate");
  if (opts.T < 1) throw Error("estimate_weights: T must be >= 1");

  WeightEstimate w;
  w.method = opts.method;
  w.T = opts.T;
  const auto n = opts.replicates;

  Matrix log_c(n, J);
  parallel_for(static_cast<std::size_t>(n) * static_cast<std::size_t>(J), workers, [&](std::size_t task) {
    const int j = static_cast<int>(task / static_cast<std::size_t>(n));
    const auto i = static_cast<std::int64_t>(task % static_cast<std::size_t>(n));
    Rng rng = Rng::stream(seed, StreamDomain::kWeights, replicate_index(j, i));
    log_c(i, j) = one_replicate(target, partition, instrumentals[static_cast<std::size_t>(j)], j, opts, rng);
  });

  double shift = kNegInf;
  for (Eigen::Index k = 0; k < log_c.size(); ++k)
    if (std::isfinite(log_c.data()[k])) shift = std::max(shift, log_c.data()[k]);
  if (shift == kNegInf) throw Error("estimate_weights: every replicate estimate is zero");
  w.log_scale = shift;
  w.c_hats = (log_c.array() - shift).exp().matrix();

  if (opts.method == WeightMethod::kRatio) {
    w.w_hat = ratio_weights(w.c_hats);
    // Delta-method SE of the ratio estimator.
    const Vector row_sums = w.c_hats.rowwise().sum();
    const double mean_total = row_sums.mean();
    w.mcse.resize(J);
    for (int j = 0; j < J; ++j) {
      const Vector resid = w.c_hats.col(j) - w.w_hat[j] * row_sums;
      const double var = n > 1 ? resid.squaredNorm() / static_cast<double>(n - 1) : 0.0;
      w.mcse[j] = std::sqrt(var / static_cast<double>(n)) / mean_total;
    }
  } else {
    Rng rng = Rng::stream(seed, StreamDomain::kPseudoMarginal, 0);
    std::int64_t draw = 0;
    auto sampler = [&](int j, Rng&) {
      Rng r = Rng::stream(seed, StreamDomain::kPseudoMarginal, static_cast<std::uint64_t>(++draw));
      return one_replicate(target, partition, instrumentals[static_cast<std::size_t>(j)], j, opts, r);
    };
    const std::int64_t iters = opts.pm_iterations > 0 ? opts.pm_iterations : n * J;
    PseudoMarginalStats stats;
    w.w_hat = pseudo_marginal_weights(sampler, J, iters, rng, &stats);
    w.mcse = stats.se;
  }
  check_tails(w);
  return w;
}

// ---------------------------------------------------------------------------
// JSON

namespace {
std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

void write_weights_json(const std::filesystem::path& path, const WeightEstimate& w) {
  nlohmann::json j;
  j["method"] = to_string(w.method);
  nlohmann::json summary;
  summary["n"] = w.c_hats.rows();
  summary["T"] = w.T;
  summary["log_scale"] = w.log_scale;
  if (w.c_hats.rows() > 0) {
    summary["mean"] = to_std(w.c_hat_mean());
    const Vector se = w.c_hat_se();
    summary["se"] = w.c_hats.rows() > 1 ? nlohmann::json(to_std(se)) : nlohmann::json::array();
    summary["max"] = to_std(w.c_hats.colwise().maxCoeff().transpose());
  }
  j["c_hat_summary"] = summary;
  j["w_hat"] = to_std(w.w_hat);
  j["mcse"] = to_std(w.mcse);
  j["warnings"] = w.warnings;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

WeightEstimate read_weights_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read weights " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    WeightEstimate w;
    w.method = weight_method_from_string(j.at("method").get<std::string>());
    w.w_hat = from_std(j.at("w_hat").get<std::vector<double>>());
    if (j.contains("mcse")) w.mcse = from_std(j.at("mcse").get<std::vector<double>>());
    if (j.contains("c_hat_summary")) {
      const auto& s = j.at("c_hat_summary");
      w.T = s.value("T", 0);
      w.log_scale = s.value("log_scale", 0.0);
    }
    if (j.contains("warnings")) w.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (w.w_hat.size() == 0) throw Error(path.string() + ": empty w_hat");
    if ((w.w_hat.array() < 0.0).any() || std::abs(w.w_hat.sum() - 1.0) > 1e-9)
      throw Error(path.string() + ": w_hat is not a probability vector");
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": weights schema mismatch: " + e.what());
  }
}

}  // namespace pmcmc
