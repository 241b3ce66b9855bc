#include "pmcmc/combine.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "pmcmc/log.hpp"

namespace pmcmc {

Statistic identity_statistic() {
  return [](const Vector& x) { return x; };
}

namespace {

constexpr int kBatches = 20;

/// Weights with negligible empty elements removed and renormalized.
Vector usable_weights(const std::vector<std::int64_t>& counts, const Vector& w_hat, std::vector<int>* dropped,
                      std::vector<std::string>* warnings) {
  check_dim("combine weights", static_cast<Eigen::Index>(counts.size()), w_hat.size());
  Vector w = w_hat;
  bool any_dropped = false;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] > 0) continue;
    if (w_hat[static_cast<Eigen::Index>(j)] > kEmptyElementThreshold)
      throw UnexploredElementError("unexplored element has non-negligible weight: element " +
                                   std::to_string(j) + " has no draws but weight " +
                                   std::to_string(w_hat[static_cast<Eigen::Index>(j)]));
    if (w[static_cast<Eigen::Index>(j)] != 0.0) any_dropped = true;
    w[static_cast<Eigen::Index>(j)] = 0.0;
    if (dropped) dropped->push_back(static_cast<int>(j));
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw UnexploredElementError("no element with draws carries positive weight");
  w /= total;
  if (any_dropped) {
    const std::string msg = "dropped empty elements with negligible weight and renormalized";
    warn(msg);
    if (warnings) warnings->push_back(msg);
  }
  return w;
}

}  // namespace

ElementMeans element_means(const Statistic& f, const DrawStore& draws, const Partition& partition) {
  check_dim("element_means", partition.dim(), draws.dim());
  const auto J = static_cast<std::size_t>(partition.size());
  const auto labels = assign_all(partition, draws);
  std::vector<std::int64_t> counts(J, 0);
  for (std::size_t i = 0; i < draws.size(); ++i)
    if (!draws.is_burnin(i)) ++counts[static_cast<std::size_t>(labels[i])];

  const Eigen::Index m = f(Vector::Zero(draws.dim())).size();
  // Streaming accumulation over the (chain, iter) ordered series of each
  // element: totals, sums of squares, and 20 consecutive batch sums.
  std::vector<Vector> sum(J, Vector::Zero(m));
  std::vector<Vector> sumsq(J, Vector::Zero(m));
  std::vector<std::vector<Vector>> batch(J, std::vector<Vector>(kBatches, Vector::Zero(m)));
  std::vector<std::int64_t> seen(J, 0);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (draws.is_burnin(i)) continue;
    const auto j = static_cast<std::size_t>(labels[i]);
    const Vector v = f(draws.theta(i));
    sum[j] += v;
    sumsq[j] += v.array().square().matrix();
    const std::int64_t size = counts[j] / kBatches;
    if (size > 0) {
      const auto b = static_cast<std::size_t>(seen[j] / size);
      if (b < kBatches) batch[j][b] += v;
    }
    ++seen[j];
  }

  ElementMeans out;
  const Vector nan = Vector::Constant(m, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < J; ++j) {
    const auto n = static_cast<double>(counts[j]);
    Vector mean = counts[j] > 0 ? Vector(sum[j] / n) : Vector(Vector::Zero(m));
    Vector se = nan;
    if (counts[j] >= 2 * kBatches) {
      const double size = static_cast<double>(counts[j] / kBatches);
      Vector grand = Vector::Zero(m);
      for (auto& b : batch[j]) {
        b /= size;
        grand += b;
      }
      grand /= kBatches;
      Vector ss = Vector::Zero(m);
      for (const auto& b : batch[j]) ss += (b - grand).array().square().matrix();
      se = (ss / (kBatches - 1.0) / kBatches).array().sqrt().matrix();
    } else if (counts[j] >= 2) {
      const Vector var = ((sumsq[j] - n * mean.array().square().matrix()) / (n - 1.0)).cwiseMax(0.0);
      se = (var / n).array().sqrt().matrix();
    }
    out.means.push_back(std::move(mean));
    out.se.push_back(std::move(se));
    out.counts.push_back(counts[j]);
    out.empty.push_back(counts[j] == 0);
  }
  return out;
}

CombinedEstimate combine(const ElementMeans& means, const Vector& w_hat, const Vector& weight_se) {
  const auto J = means.means.size();
  if (J == 0) throw Error("combine: no elements");
  CombinedEstimate est;
  est.weights = usable_weights(means.counts, w_hat, &est.dropped, &est.warnings);
  est.per_element_means = means.means;
  est.per_element_se = means.se;
  est.counts = means.counts;

  const auto m = means.means.front().size();
  est.combined = Vector::Zero(m);
  for (std::size_t j = 0; j < J; ++j)
    if (means.counts[j] > 0) est.combined += est.weights[static_cast<Eigen::Index>(j)] * means.means[j];

  Vector var = Vector::Zero(m);
  for (std::size_t j = 0; j < J; ++j) {
    if (means.counts[j] == 0) continue;
    const double wj = est.weights[static_cast<Eigen::Index>(j)];
    Vector se_j = means.se[j];
    se_j = se_j.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
    var += (wj * wj) * se_j.array().square().matrix();
    if (weight_se.size() == static_cast<Eigen::Index>(J)) {
      const double sw = weight_se[static_cast<Eigen::Index>(j)];
      var += (sw * sw) * (means.means[j] - est.combined).array().square().matrix();
    }
  }
  est.combined_se = var.array().sqrt().matrix();
  return est;
}

WeightedSample weighted_empirical(const DrawStore& draws, const Partition& partition, const Vector& w_hat) {
  const auto labels = assign_all(partition, draws);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(partition.size()), 0);
  for (std::size_t i = 0; i < draws.size(); ++i)
    if (!draws.is_burnin(i)) ++counts[static_cast<std::size_t>(labels[i])];
  const Vector w = usable_weights(counts, w_hat, nullptr, nullptr);
  WeightedSample out;
  out.index.reserve(draws.post_burnin_count());
  out.mass.reserve(draws.post_burnin_count());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (draws.is_burnin(i)) continue;
    const auto j = static_cast<std::size_t>(labels[i]);
    out.index.push_back(i);
    out.mass.push_back(w[static_cast<Eigen::Index>(j)] / static_cast<double>(counts[j]));
  }
  return out;
}

namespace {
std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}
/// JSON has no NaN; missing SEs are written as null.
nlohmann::json vec_json(const Vector& v) {
  auto j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    j.push_back(std::isfinite(v[i]) ? nlohmann::json(v[i]) : nlohmann::json(nullptr));
  return j;
}
Vector vec_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[i].get<double>();
  return v;
}
}  // namespace

void write_report_json(const std::filesystem::path& path, const CombinedEstimate& est) {
  nlohmann::json j;
  j["w_hat"] = to_std(est.weights);
  auto per = nlohmann::json::array();
  for (std::size_t k = 0; k < est.per_element_means.size(); ++k) {
    per.push_back({{"n", est.counts[k]},
                   {"mean", vec_json(est.per_element_means[k])},
                   {"se", vec_json(est.per_element_se[k])}});
  }
  j["per_element"] = per;
  j["combined"] = {{"mean", vec_json(est.combined)}, {"se", vec_json(est.combined_se)}};
  if (!est.dropped.empty()) j["dropped"] = est.dropped;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

CombinedEstimate read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read report " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    CombinedEstimate est;
    est.weights = from_std(j.at("w_hat").get<std::vector<double>>());
    for (const auto& e : j.at("per_element")) {
      est.counts.push_back(e.at("n").get<std::int64_t>());
      est.per_element_means.push_back(vec_from_json(e.at("mean")));
      est.per_element_se.push_back(vec_from_json(e.at("se")));
    }
    est.combined = vec_from_json(j.at("combined").at("mean"));
    est.combined_se = vec_from_json(j.at("combined").at("se"));
    if (j.contains("dropped")) est.dropped = j.at("dropped").get<std::vector<int>>();
    return est;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": report schema mismatch: " + e.what());
  }
}

}  // namespace pmcmc
