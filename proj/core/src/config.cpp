#include "pmcmc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "pmcmc/mvt.hpp"

namespace pmcmc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  const std::string* raw(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void str(const std::string& key, std::string& v) {
    if (auto r = raw(key)) v = *r;
  }

  void number(const std::string& key, double& v) {
    if (auto r = raw(key)) v = parse_double(key, *r);
  }

  template <typename Int>
  void integer(const std::string& key, Int& v) {
    if (auto r = raw(key)) {
      long long x = 0;
      auto [p, ec] = std::from_chars(r->data(), r->data() + r->size(), x);
      if (ec != std::errc() || p != r->data() + r->size())
        throw ConfigError(key + ": expected an integer, got '" + *r + "'");
      if constexpr (std::is_unsigned_v<Int>) {
        if (x < 0) throw ConfigError(key + ": must be non-negative");
      }
      v = static_cast<Int>(x);
    }
  }

  void boolean(const std::string& key, bool& v) {
    if (auto r = raw(key)) {
      if (*r == "true" || *r == "1" || *r == "yes") v = true;
      else if (*r == "false" || *r == "0" || *r == "no") v = false;
      else throw ConfigError(key + ": expected true or false, got '" + *r + "'");
    }
  }

  void list(const std::string& key, std::vector<double>& v) {
    if (auto r = raw(key)) {
      v.clear();
      for (const auto& s : split(*r, ',')) v.push_back(parse_double(key, s));
    }
  }

  /// Rows separated by ';', entries by ','.
  void rows(const std::string& key, std::vector<std::vector<double>>& v) {
    if (auto r = raw(key)) {
      v.clear();
      for (const auto& row : split(*r, ';')) {
        std::vector<double> x;
        for (const auto& s : split(row, ',')) x.push_back(parse_double(key, s));
        v.push_back(std::move(x));
      }
    }
  }

  template <typename E>
  void choice(const std::string& key, E& v, const std::vector<std::pair<std::string, E>>& options) {
    if (auto r = raw(key)) {
      for (const auto& [name, value] : options)
        if (name == *r) {
          v = value;
          return;
        }
      std::string names;
      for (const auto& o : options) names += (names.empty() ? "" : ", ") + o.first;
      throw ConfigError(key + ": unknown value '" + *r + "' (expected one of " + names + ")");
    }
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

  static double parse_double(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "normal") return MvtDist::kNormal;
    double x = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    return x;
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (!kv.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::string to_string(Model m) {
  switch (m) {
    case Model::kMixture2d: return "mixture2d";
    case Model::kRandomMixture: return "random_mixture";
    case Model::kProbit: return "probit";
    case Model::kLoh: return "loh";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  require(workers >= 0, "workers must be >= 0");
  require(target.dim >= 1 && target.components >= 1, "target.dim and target.components must be >= 1");
  require(target.cov_scale > 0.0, "target.cov_scale must be positive");
  require(target.prior_variance > 0.0, "target.prior_variance must be positive");
  require(target.prior_bound > 0.0, "target.prior_bound must be positive");
  if (target.model == Model::kProbit || target.model == Model::kLoh) {
    require(!target.data.empty(), "target.data is required for model " + to_string(target.model));
    require(std::filesystem::exists(target.data), "target.data: file not found: " + target.data.string());
  }
  require(chains.count >= 1, "chains.count must be >= 1");
  require(chains.iterations >= 1, "chains.iterations must be >= 1");
  require(chains.burn_in >= 0 && chains.burn_in < chains.iterations, "chains.burn_in must lie in [0, iterations)");
  require(chains.step >= 0.0 && std::isfinite(chains.step), "chains.step must be finite and >= 0");
  require(chains.thin >= 1, "chains.thin must be >= 1");
  require(chains.adapt_window >= 1, "chains.adapt_window must be >= 1");
  if (chains.kernel == Kernel::kGibbsProbit)
    require(target.model == Model::kProbit, "chains.kernel = gibbs requires target.model = probit");
  if (chains.kernel == Kernel::kLangevin)
    require(target.model == Model::kMixture2d || target.model == Model::kRandomMixture,
            "chains.kernel = langevin needs a target with a gradient (mixture models)");
  if (chains.init == InitMethod::kBox) {
    require(!chains.init_lo.empty() && chains.init_lo.size() == chains.init_hi.size(),
            "chains.init_lo and chains.init_hi must have equal, non-zero length");
    for (std::size_t i = 0; i < chains.init_lo.size(); ++i)
      require(chains.init_lo[i] < chains.init_hi[i], "chains.init_lo must be below chains.init_hi");
  } else if (chains.init == InitMethod::kPoint) {
    require(!chains.init_point.empty(), "chains.init_point is required for chains.init = point");
  } else if (chains.init == InitMethod::kModes) {
    require(!partition.modes.empty(), "chains.init = modes requires partition.modes");
  }
  require(partition.epsilon2 > 0.0, "partition.epsilon2 must be positive");
  require(partition.alpha >= 0.0 && partition.alpha < 1.0, "partition.alpha must lie in [0, 1)");
  require(partition.max_points >= 1, "partition.max_points must be >= 1");
  require(partition.prefix >= 0, "partition.prefix must be >= 0");
  if (partition.method == PartitionMethod::kModes)
    require(!partition.modes.empty(), "partition.modes is required for partition.method = modes");
  if (partition.method == PartitionMethod::kQuantiles) {
    require(!partition.quantiles.empty(), "partition.quantiles is required for partition.method = quantiles");
    for (double q : partition.quantiles) require(q > 0.0 && q < 1.0, "partition.quantiles must lie in (0, 1)");
  }
  require(weights.n >= 1, "weights.n must be >= 1");
  require(weights.T >= 1, "weights.T must be >= 1");
  require(weights.instrumental.nu > 0.0, "weights.nu must be positive");
  require(weights.instrumental.inflation > 0.0, "weights.inflation must be positive");
  require(weights.trajectory_sigma >= 0.0, "weights.trajectory_sigma must be >= 0");
  require(weights.pm_iterations >= 0 && weights.prefix >= 0, "weights.pm_iterations and weights.prefix must be >= 0");
  require(diagnostics.threshold > 0.0 && diagnostics.threshold < 1.0, "diagnostics.threshold must lie in (0, 1)");
  require(diagnostics.every >= 1, "diagnostics.every must be >= 1");
  require(diagnostics.reference_draws >= 1, "diagnostics.reference_draws must be >= 1");
  require(diagnostics.coordinate >= 0, "diagnostics.coordinate must be >= 0");
  require(diagnostics.serial_iterations >= 0, "diagnostics.serial_iterations must be >= 0");
  require(diagnostics.long_run_chains >= 1 && diagnostics.long_run_burn_in >= 0,
          "diagnostics.long_run_chains must be >= 1 and long_run_burn_in >= 0");
  if (diagnostics.reference == Reference::kMixture)
    require(target.model == Model::kMixture2d || target.model == Model::kRandomMixture,
            "diagnostics.reference = mixture needs a mixture target");
  if (diagnostics.reference == Reference::kProbitRejection)
    require(target.model == Model::kProbit, "diagnostics.reference = probit_rejection needs a probit target");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  Reader r(parse_key_values(text));
  ExperimentConfig c;
  r.str("name", c.name);
  r.integer("seed", c.seed);
  r.integer("workers", c.workers);
  if (auto v = r.raw("out")) c.out = *v;

  auto& t = c.target;
  r.choice("target.model", t.model,
           {{"mixture2d", Model::kMixture2d}, {"random_mixture", Model::kRandomMixture},
            {"probit", Model::kProbit}, {"loh", Model::kLoh}});
  r.integer("target.dim", t.dim);
  r.integer("target.components", t.components);
  r.integer("target.mixture_seed", t.mixture_seed);
  r.number("target.cov_scale", t.cov_scale);
  if (auto v = r.raw("target.data")) {
    t.data = *v;
    if (t.data.is_relative() && !base_dir.empty()) t.data = base_dir / t.data;
  }
  r.number("target.prior_variance", t.prior_variance);
  r.number("target.prior_bound", t.prior_bound);

  auto& ch = c.chains;
  r.integer("chains.count", ch.count);
  r.choice("chains.kernel", ch.kernel,
           {{"langevin", Kernel::kLangevin}, {"rwm", Kernel::kRwm}, {"gibbs", Kernel::kGibbsProbit}});
  r.integer("chains.iterations", ch.iterations);
  r.integer("chains.burn_in", ch.burn_in);
  r.number("chains.step", ch.step);
  r.boolean("chains.adapt", ch.adapt);
  r.integer("chains.adapt_window", ch.adapt_window);
  r.integer("chains.thin", ch.thin);
  r.choice("chains.init", ch.init, {{"box", InitMethod::kBox}, {"point", InitMethod::kPoint}, {"logit_uniform", InitMethod::kLogitUniform},
            {"modes", InitMethod::kModes}});
  r.list("chains.init_lo", ch.init_lo);
  r.list("chains.init_hi", ch.init_hi);
  r.list("chains.init_point", ch.init_point);

  auto& p = c.partition;
  r.choice("partition.method", p.method,
           {{"cluster", PartitionMethod::kCluster}, {"modes", PartitionMethod::kModes},
            {"quantiles", PartitionMethod::kQuantiles}});
  r.number("partition.epsilon2", p.epsilon2);
  r.number("partition.alpha", p.alpha);
  r.boolean("partition.normalize", p.normalize);
  r.choice("partition.transform", p.transform,
           {{"identity", Transform::kIdentity}, {"logistic", Transform::kLogistic}});
  r.integer("partition.max_points", p.max_points);
  r.integer("partition.prefix", p.prefix);
  r.rows("partition.modes", p.modes);
  r.list("partition.quantiles", p.quantiles);

  auto& w = c.weights;
  r.choice("weights.method", w.method,
           {{"ratio", WeightMethod::kRatio}, {"pseudo_marginal", WeightMethod::kPseudoMarginal}});
  r.choice("weights.sampler", w.sampler,
           {{"iid", ReplicateSampler::kIid}, {"trajectory", ReplicateSampler::kTrajectory}});
  r.integer("weights.n", w.n);
  r.integer("weights.T", w.T);
  r.choice("weights.location", w.instrumental.location,
           {{"cluster_center", Location::kClusterCenter}, {"empirical_mode", Location::kEmpiricalMode},
            {"empirical_mean", Location::kEmpiricalMean}, {"hessian_mode", Location::kHessianMode}});
  r.number("weights.nu", w.instrumental.nu);
  r.number("weights.inflation", w.instrumental.inflation);
  r.number("weights.trajectory_sigma", w.trajectory_sigma);
  r.integer("weights.pm_iterations", w.pm_iterations);
  r.integer("weights.prefix", w.prefix);

  auto& d = c.diagnostics;
  r.choice("diagnostics.reference", d.reference,
           {{"none", Reference::kNone}, {"mixture", Reference::kMixture},
            {"probit_rejection", Reference::kProbitRejection}, {"long_run", Reference::kLongRun}});
  r.integer("diagnostics.reference_draws", d.reference_draws);
  r.choice("diagnostics.bins", d.bins,
           {{"none", BinSet::kNone}, {"probit1", BinSet::kProbitOne}, {"probit8", BinSet::kProbitEight}});
  r.integer("diagnostics.coordinate", d.coordinate);
  r.number("diagnostics.threshold", d.threshold);
  r.integer("diagnostics.every", d.every);
  r.integer("diagnostics.serial_iterations", d.serial_iterations);
  r.integer("diagnostics.long_run_chains", d.long_run_chains);
  r.integer("diagnostics.long_run_burn_in", d.long_run_burn_in);

  r.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace pmcmc
