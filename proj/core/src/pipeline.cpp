#include "pmcmc/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pmcmc/executor.hpp"
#include "pmcmc/log.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/samplers.hpp"
#include "pmcmc/special.hpp"

namespace pmcmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Stream index offsets keeping auxiliary draws apart from the chains.
constexpr std::uint64_t kInitOffset = 1ull << 32;
constexpr std::uint64_t kSerialIndex = 1ull << 33;

template <typename F>
auto in_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

Vector broadcast(const std::vector<double>& v, int dim, const char* key) {
  if (v.size() == 1) return Vector::Constant(dim, v[0]);
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError(std::string(key) + ": expected 1 or " + std::to_string(dim) + " values, got " +
                      std::to_string(v.size()));
  return Eigen::Map<const Vector>(v.data(), dim);
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }


json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v[i]));
  return a;
}

DrawStore load_draws(const ExperimentConfig& cfg, const StageInputs& in) {
  const OutputLayout layout{cfg.out};
  const auto paths = in.draws.empty() ? layout.all_draws(cfg.chains.count) : in.draws;
  DrawStore d = read_draws_csv(std::span<const fs::path>(paths));
  if (in.prefix) d = d.prefix(*in.prefix);
  return d;
}

fs::path or_default(const fs::path& p, const fs::path& fallback) { return p.empty() ? fallback : p; }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

Matrix element_rows(const DrawStore& post, const Partition& partition, int j) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < post.size(); ++i)
    if (partition.assign(post.theta(i)) == j) idx.push_back(i);
  Matrix m(static_cast<Eigen::Index>(idx.size()), post.dim());
  for (std::size_t r = 0; r < idx.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = post.theta(idx[r]).transpose();
  return m;
}

void write_trace_csv(const fs::path& path, const ConvergenceTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "checkpoint,tv\n";
  char buf[64];
  for (const auto& p : trace.points) {
    out << p.checkpoint << ',';
    if (std::isfinite(p.tv)) {
      std::snprintf(buf, sizeof buf, "%.17g", p.tv);
      out << buf;
    } else {
      out << "nan";
    }
    out << '\n';
  }
}

DrawStore run_chains(const ExperimentModel& model, std::span<const ChainConfig> cfgs, int workers) {
  if (!cfgs.empty() && cfgs.front().kernel == Kernel::kGibbsProbit) return run_parallel_chains(*model.probit, cfgs, workers);
  return run_parallel_chains(model.target, cfgs, workers);
}

std::optional<Discretization> bins_for(const ExperimentConfig& cfg) {
  switch (cfg.diagnostics.bins) {
    case BinSet::kProbitOne: return probit_one_bins();
    case BinSet::kProbitEight: return probit_eight_bins();
    case BinSet::kNone: break;
  }
  return std::nullopt;
}

Matrix reference_points(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in) {
  if (!in.reference.empty()) return read_reference_csv(in.reference);
  const auto& d = cfg.diagnostics;
  const auto n = static_cast<std::size_t>(d.reference_draws);
  switch (d.reference) {
    case Reference::kNone: return Matrix(0, model.target.dim);
    case Reference::kMixture: {
      Rng rng = Rng::stream(cfg.seed, StreamDomain::kReference, 0);
      return mixture_reference(*model.mixture, n, rng);
    }
    case Reference::kProbitRejection: {
      Rng rng = Rng::stream(cfg.seed, StreamDomain::kReference, 0);
      const auto v = probit_rejection_reference(*model.probit, n, rng);
      return Eigen::Map<const Matrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1);
    }
    case Reference::kLongRun: {
      const MvtDist laplace = laplace_instrumental(model.target, Vector::Zero(model.target.dim));
      const auto per_chain = static_cast<std::int64_t>((n + static_cast<std::size_t>(d.long_run_chains) - 1) /
                                                       static_cast<std::size_t>(d.long_run_chains));
      const DrawStore run =
          long_run_reference(model.target, laplace.location(), laplace.covariance(), per_chain + d.long_run_burn_in,
                             d.long_run_burn_in, d.long_run_chains, resolve_workers(cfg.workers),
                             derive_seed(cfg.seed, StreamDomain::kReference, 1));
      return run.post_burnin_matrix();
    }
  }
  return Matrix(0, model.target.dim);
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentModel build_model(const ExperimentConfig& cfg) {
  ExperimentModel m;
  const auto& t = cfg.target;
  switch (t.model) {
    case Model::kMixture2d:
      m.mixture = four_mode_mixture();
      m.target = m.mixture->as_target();
      break;
    case Model::kRandomMixture:
      m.mixture = random_mixture(t.dim, t.components, t.mixture_seed, t.cov_scale);
      m.target = m.mixture->as_target();
      break;
    case Model::kProbit: {
      ProbitData data = read_probit_csv(t.data);
      m.probit.emplace(std::move(data.X), std::move(data.y), Vector::Constant(1, t.prior_variance));
      m.target = m.probit->as_target();
      break;
    }
    case Model::kLoh:
      m.loh.emplace(read_loh_csv(t.data), t.prior_bound);
      m.target = m.loh->as_target();
      break;
  }
  m.statistic = t.model == Model::kLoh ? Statistic([](const Vector& th) { return LohModel::natural_parameters(th); })
                                       : identity_statistic();

  const int p = m.target.dim;
  const auto& ch = cfg.chains;
  if (ch.init == InitMethod::kBox) {
    broadcast(ch.init_lo, p, "chains.init_lo");
    broadcast(ch.init_hi, p, "chains.init_hi");
  }
  if (ch.init == InitMethod::kPoint) broadcast(ch.init_point, p, "chains.init_point");
  for (const auto& mode : cfg.partition.modes)
    if (static_cast<int>(mode.size()) != p)
      throw ConfigError("partition.modes: each row needs " + std::to_string(p) + " values");
  if (cfg.partition.method == PartitionMethod::kQuantiles && p != 1)
    throw ConfigError("partition.method = quantiles needs a one-dimensional target");
  if (cfg.diagnostics.coordinate >= p)
    throw ConfigError("diagnostics.coordinate must be below the target dimension " + std::to_string(p));
  return m;
}

fs::path OutputLayout::draws(int chain) const {
  char name[48];
  std::snprintf(name, sizeof name, "draws_chain_%02d.csv", chain);
  return dir / name;
}

std::vector<fs::path> OutputLayout::all_draws(int chains) const {
  std::vector<fs::path> out;
  for (int c = 0; c < chains; ++c) out.push_back(draws(c));
  return out;
}

std::vector<ChainConfig> chain_configs(const ExperimentConfig& cfg, int dim) {
  const auto& ch = cfg.chains;
  std::vector<ChainConfig> out;
  for (int c = 0; c < ch.count; ++c) {
    ChainConfig cc;
    cc.kernel = ch.kernel;
    cc.chain_id = c;
    cc.step_scale = ch.step;
    cc.iterations = ch.iterations;
    cc.burn_in = ch.burn_in;
    cc.seed = derive_seed(cfg.seed, StreamDomain::kChain, static_cast<std::uint64_t>(c));
    cc.thin = ch.thin;
    cc.adapt = ch.adapt;
    cc.adapt_window = ch.adapt_window;
    switch (ch.init) {
      case InitMethod::kBox:
        cc.init = UniformBox{broadcast(ch.init_lo, dim, "chains.init_lo"), broadcast(ch.init_hi, dim, "chains.init_hi")};
        break;
      case InitMethod::kPoint:
        cc.init = broadcast(ch.init_point, dim, "chains.init_point");
        break;
      case InitMethod::kLogitUniform: {
        Rng rng = Rng::stream(cfg.seed, StreamDomain::kChain, kInitOffset + static_cast<std::uint64_t>(c));
        Vector x(dim);
        for (int i = 0; i < dim; ++i) x[i] = logit(rng.uniform());
        cc.init = x;
        break;
      }
      case InitMethod::kModes:
        cc.init = to_vector(cfg.partition.modes[static_cast<std::size_t>(c) % cfg.partition.modes.size()]);
        break;
    }
    cc.validate();
    out.push_back(std::move(cc));
  }
  return out;
}

DrawStore stage_sample(const ExperimentConfig& cfg, const ExperimentModel& model) {
  return in_stage("sample", [&] {
    const auto cfgs = chain_configs(cfg, model.target.dim);
    DrawStore all = run_chains(model, cfgs, resolve_workers(cfg.workers));
    const OutputLayout layout{cfg.out};
    fs::create_directories(cfg.out);
    std::size_t i = 0;
    for (int c = 0; c < cfg.chains.count; ++c) {
      DrawStore one(all.dim());
      for (; i < all.size() && all.chain(i) == c; ++i) one.append(c, all.iter(i), all.theta(i), all.is_burnin(i));
      write_draws_csv(layout.draws(c), one);
    }
    return all;
  });
}

Partition stage_partition(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in) {
  return in_stage("partition", [&] {
    const auto& ps = cfg.partition;
    std::optional<Partition> part;
    if (ps.method == PartitionMethod::kModes) {
      std::vector<Vector> centers;
      for (const auto& start : ps.modes) centers.push_back(find_mode(model.target, to_vector(start)));
      part = Partition::from_original_centers(centers, ps.transform, std::nullopt, ps.epsilon2, ps.alpha);
    } else {
      DrawStore draws = load_draws(cfg, in);
      if (ps.method == PartitionMethod::kCluster) {
        if (ps.prefix > 0) draws = draws.first_post_burnin(ps.prefix);
        ClusterOptions opts{ps.epsilon2, ps.alpha, ps.normalize, ps.transform, ps.max_points};
        part = cluster(draws, opts);
      } else {
        part = quantile_partition(draws, ps.quantiles);
      }
    }
    const fs::path out = or_default(in.output, OutputLayout{cfg.out}.partition());
    ensure_parent(out);
    write_partition_json(out, *part);
    return *part;
  });
}

WeightEstimate stage_weights(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in) {
  return in_stage("weights", [&] {
    const OutputLayout layout{cfg.out};
    const Partition partition = read_partition_json(or_default(in.partition, layout.partition()));
    const auto& ws = cfg.weights;
    std::vector<MvtDist> q;
    if (ws.instrumental.location == Location::kHessianMode) {
      for (int j = 0; j < partition.size(); ++j)
        q.push_back(laplace_instrumental(model.target, partition.center_original(j), ws.instrumental.nu,
                                         ws.instrumental.inflation));
    } else {
      DrawStore post = load_draws(cfg, in).post_burnin();
      if (ws.prefix > 0) post = post.first_post_burnin(ws.prefix);
      for (int j = 0; j < partition.size(); ++j) {
        const Vector center = partition.center_original(j);
        q.push_back(fit_instrumental(element_rows(post, partition, j), ws.instrumental, &model.target, &center));
      }
    }
    WeightOptions opts;
    opts.method = ws.method;
    opts.sampler = ws.sampler;
    opts.replicates = ws.n;
    opts.T = ws.T;
    opts.trajectory.sigma = ws.trajectory_sigma;
    opts.pm_iterations = ws.pm_iterations;
    WeightEstimate w = estimate_weights(model.target, partition, q, opts,
                                        derive_seed(cfg.seed, StreamDomain::kWeights, 0),
                                        resolve_workers(cfg.workers));
    for (const auto& msg : w.warnings) warn(msg);
    const fs::path out = or_default(in.output, layout.weights());
    ensure_parent(out);
    write_weights_json(out, w);
    return w;
  });
}

CombinedEstimate stage_combine(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in) {
  return in_stage("combine", [&] {
    const OutputLayout layout{cfg.out};
    const Partition partition = read_partition_json(or_default(in.partition, layout.partition()));
    const WeightEstimate w = read_weights_json(or_default(in.weights, layout.weights()));
    const DrawStore draws = load_draws(cfg, in);
    const ElementMeans means = element_means(model.statistic, draws, partition);
    CombinedEstimate est = combine(means, w.w_hat, w.mcse);
    for (const auto& msg : est.warnings) warn(msg);
    const fs::path out = or_default(in.output, layout.report());
    ensure_parent(out);
    write_report_json(out, est);
    return est;
  });
}

DiagnosticsSummary stage_diagnose(const ExperimentConfig& cfg, const ExperimentModel& model, const StageInputs& in) {
  return in_stage("diagnose", [&] {
    const OutputLayout layout{cfg.out};
    const fs::path json_out = or_default(in.output, layout.diagnostics_json());
    const fs::path dir = json_out.has_parent_path() ? json_out.parent_path() : fs::path(".");
    fs::create_directories(dir);
    const Partition partition = read_partition_json(or_default(in.partition, layout.partition()));
    const WeightEstimate w = read_weights_json(or_default(in.weights, layout.weights()));
    const DrawStore draws = load_draws(cfg, in);
    const auto& ds = cfg.diagnostics;

    DiagnosticsSummary s;
    s.w_hat = w.w_hat;

    // Lag-1 autocorrelation per coordinate, averaged over chains.
    const int p = draws.dim();
    s.lag1 = Vector::Zero(p);
    for (int k = 0; k < p; ++k) {
      double sum = 0.0;
      int used = 0;
      std::vector<double> series;
      for (std::size_t i = 0; i <= draws.size(); ++i) {
        const bool boundary = i == draws.size() || (i > 0 && draws.chain(i) != draws.chain(i - 1));
        if (boundary && series.size() > 2) {
          try {
            sum += lag_autocorrelation(series, 1);
            ++used;
          } catch (const Error&) {
          }
        }
        if (boundary) series.clear();
        if (i < draws.size() && !draws.is_burnin(i)) series.push_back(draws.theta(i)[k]);
      }
      s.lag1[k] = used ? sum / used : kNaN;
    }

    const Matrix ref = reference_points(cfg, model, in);
    if (ref.rows() > 0) {
      if (ref.cols() != partition.dim()) throw Error("reference dimension does not match the partition");
      s.occupancy = element_occupancy(partition, ref);
      s.weight_tv = tv_distance(w.w_hat, *s.occupancy);
    }

    if (model.mixture) {
      const auto& mix = *model.mixture;
      s.component_weights = component_weights(partition, w.w_hat, mix);
      const CombinedEstimate est = combine(element_means(model.statistic, draws, partition), w.w_hat, w.mcse);
      s.mean_abs_error = (est.combined - mix.mean()).cwiseAbs().mean();
    }

    const auto d = bins_for(cfg);
    if (d && ref.rows() > 0) {
      const int k = ds.coordinate;
      std::vector<double> ref_values(static_cast<std::size_t>(ref.rows()));
      for (Eigen::Index i = 0; i < ref.rows(); ++i) ref_values[static_cast<std::size_t>(i)] = ref(i, k);
      const Vector ref_hist = histogram(ref_values, {}, *d);

      // Checkpoints fall every `every` pooled draws. With L chains that is every/L iterations
      // per chain, and the per-chain iteration is the wall-clock-equalized count.
      const auto chains = std::max<std::int64_t>(1, static_cast<std::int64_t>(draws.chain_ids().size()));
      const std::int64_t per_chain_every = std::max<std::int64_t>(1, ds.every / chains);
      s.combined = combined_convergence(draws, partition, w.w_hat, k, ref_hist, *d, ds.threshold, per_chain_every);
      write_trace_csv(dir / layout.diagnostics_csv().filename(), *s.combined);

      const WeightedSample ws = weighted_empirical(draws, partition, w.w_hat);
      std::vector<double> values;
      values.reserve(ws.index.size());
      for (auto i : ws.index) values.push_back(draws.theta(i)[k]);
      s.combined_tv = tv_distance(histogram(values, ws.mass, *d), ref_hist);

      if (ds.serial_iterations > 0) {
        ChainConfig sc = chain_configs(cfg, p).front();
        sc.chain_id = cfg.chains.count;
        sc.iterations = ds.serial_iterations;
        sc.burn_in = std::min(cfg.chains.burn_in, ds.serial_iterations - 1);
        sc.seed = derive_seed(cfg.seed, StreamDomain::kChain, kSerialIndex);
        sc.init = cfg.chains.init == InitMethod::kPoint ? broadcast(cfg.chains.init_point, p, "chains.init_point")
                                                        : Vector(Vector::Zero(p));
        const std::vector<ChainConfig> one{sc};
        const DrawStore serial = run_chains(model, one, 1);
        std::vector<double> stream;
        stream.reserve(serial.size());
        for (std::size_t i = 0; i < serial.size(); ++i)
          if (!serial.is_burnin(i)) stream.push_back(serial.theta(i)[k]);
        s.serial = iterations_to_threshold(stream, ref_hist, *d, ds.threshold, ds.every);
        write_trace_csv(dir / layout.serial_csv().filename(), *s.serial);
        const auto pooled = static_cast<std::int64_t>(draws.post_burnin_count());
        for (const auto& pt : s.serial->points) {
          if (pt.checkpoint <= pooled) s.serial_tv_at_pooled = pt.tv;
          if (!s.serial_reaches_combined && pt.tv <= *s.combined_tv) s.serial_reaches_combined = pt.checkpoint;
        }
      }
    }
    write_summary_json(json_out, s);
    return s;
  });
}

void write_summary_json(const fs::path& path, const DiagnosticsSummary& s) {
  json j;
  j["w_hat"] = vector_json(s.w_hat);
  j["lag1_autocorrelation"] = vector_json(s.lag1);
  if (s.occupancy) j["reference_occupancy"] = vector_json(*s.occupancy);
  if (s.weight_tv) j["weight_tv"] = number_or_null(*s.weight_tv);
  if (s.component_weights) j["component_weights"] = vector_json(*s.component_weights);
  if (s.mean_abs_error) j["mean_abs_error"] = number_or_null(*s.mean_abs_error);
  if (s.combined_tv) j["combined_tv"] = number_or_null(*s.combined_tv);
  auto reached = [](const std::optional<ConvergenceTrace>& t) {
    return t && t->reached ? json(*t->reached) : json(nullptr);
  };
  if (s.combined) j["combined_reached"] = reached(s.combined);
  if (s.serial) {
    j["serial_reached"] = reached(s.serial);
    j["serial_tv_at_pooled"] = s.serial_tv_at_pooled ? number_or_null(*s.serial_tv_at_pooled) : json(nullptr);
    j["serial_reaches_combined"] = s.serial_reaches_combined ? json(*s.serial_reaches_combined) : json(nullptr);
    if (s.combined && s.combined->reached && s.serial->reached)
      j["speedup"] = static_cast<double>(*s.serial->reached) / static_cast<double>(*s.combined->reached);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void cmd_run(const ExperimentConfig& cfg) {
  const ExperimentModel model = in_stage("model", [&] { return build_model(cfg); });
  stage_sample(cfg, model);
  stage_partition(cfg, model);
  stage_weights(cfg, model);
  stage_combine(cfg, model);
  stage_diagnose(cfg, model);
}

std::string stage_plan(const ExperimentConfig& cfg) {
  const auto& ch = cfg.chains;
  const auto& ps = cfg.partition;
  const auto& ws = cfg.weights;
  const auto& ds = cfg.diagnostics;
  static const char* kernels[] = {"langevin", "rwm", "gibbs"};
  static const char* methods[] = {"cluster", "modes", "quantiles"};
  static const char* refs[] = {"none", "mixture", "probit_rejection", "long_run"};
  const OutputLayout layout{cfg.out};
  std::ostringstream o;
  o << "experiment " << cfg.name << " (model " << to_string(cfg.target.model) << ", seed " << cfg.seed
    << ", workers " << resolve_workers(cfg.workers) << ")\n";
  o << "1. sample     " << ch.count << " x " << ch.iterations << " " << kernels[static_cast<int>(ch.kernel)]
    << " iterations, burn-in " << ch.burn_in << " -> " << layout.draws(0).string()
    << (ch.count > 1 ? " .. " + layout.draws(ch.count - 1).filename().string() : "") << "\n";
  o << "2. partition  " << methods[static_cast<int>(ps.method)];
  if (ps.method == PartitionMethod::kCluster)
    o << " eps2=" << ps.epsilon2 << " alpha=" << ps.alpha << " normalize=" << (ps.normalize ? "true" : "false")
      << " transform=" << to_string(ps.transform) << " prefix=" << ps.prefix;
  o << " -> " << layout.partition().string() << "\n";
  o << "3. weights    " << to_string(ws.method) << " / " << to_string(ws.sampler) << " n=" << ws.n << " T=" << ws.T
    << " location=" << to_string(ws.instrumental.location) << " -> " << layout.weights().string() << "\n";
  o << "4. combine    -> " << layout.report().string() << "\n";
  o << "5. diagnose   reference=" << refs[static_cast<int>(ds.reference)];
  if (ds.serial_iterations > 0) o << " serial=" << ds.serial_iterations;
  o << " -> " << layout.diagnostics_json().string() << "\n";
  return o.str();
}

void cmd_simulate(const std::string& model, std::int64_t n, std::uint64_t seed, const fs::path& out) {
  ensure_parent(out);
  if (model == "probit1") {
    const ProbitData d = simulate_probit_one(n < 0 ? 2000 : n, seed);
    write_probit_csv(out, d.X, d.y);
  } else if (model == "probit8") {
    const ProbitData d = simulate_probit_eight(n < 0 ? 500 : n, seed);
    write_probit_csv(out, d.X, d.y);
  } else if (model == "loh") {
    write_loh_csv(out, simulate_loh(n < 0 ? 40 : static_cast<int>(n), seed, 0.816, 0.299, 0.678, 9.6));
  } else {
    throw ConfigError("unknown model '" + model + "' (expected probit1, probit8 or loh)");
  }
}

}  // namespace pmcmc
