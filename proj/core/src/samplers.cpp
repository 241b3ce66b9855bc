#include "pmcmc/samplers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pmcmc/log.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/special.hpp"

namespace pmcmc {

namespace {

bool keep(const ChainConfig& cfg, std::int64_t iter) { return iter % cfg.thin == 0; }

std::string chain_tag(const ChainConfig& cfg) { return "chain " + std::to_string(cfg.chain_id); }

}  // namespace

Vector draw_initial_state(const Initializer& init, int dim, Rng& rng) {
  return std::visit(
      [&](const auto& spec) -> Vector {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, Vector>) {
          check_dim("chain initial point", dim, spec.size());
          return spec;
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          check_dim("chain initial box", dim, spec.lo.size());
          check_dim("chain initial box", dim, spec.hi.size());
          Vector x(dim);
          for (int i = 0; i < dim; ++i) x[i] = rng.uniform(spec.lo[i], spec.hi[i]);
          return x;
        } else {
          check_dim("chain initial distribution", dim, spec.dim());
          return spec.sample(rng);
        }
      },
      init);
}

void ChainConfig::validate() const {
  if (iterations < 1) throw Error("ChainConfig: iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations)
    throw Error("ChainConfig: need 0 <= burn_in < iterations");
  if (!(step_scale >= 0.0)) throw Error("ChainConfig: step scale must be non-negative");
  if (kernel == Kernel::kRwm && !(step_scale > 0.0))
    throw Error("ChainConfig: random-walk scale must be positive");
  if (thin < 1) throw Error("ChainConfig: thin must be >= 1");
  if (adapt && adapt_window < 0) throw Error("ChainConfig: adapt_window must be non-negative");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw Error("ChainConfig: target acceptance must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// Langevin

Vector langevin_step(const Target& target, const Vector& theta, double sigma, Rng& rng) {
  if (!target.has_gradient()) throw Error("langevin_step: target has no gradient");
  if (sigma == 0.0) return theta;
  return theta + 0.5 * sigma * sigma * target.grad_log_g(theta) + sigma * rng.normal_vector(theta.size());
}

DrawStore langevin_chain(const Target& target, const ChainConfig& cfg) {
  cfg.validate();
  if (!target.has_gradient()) throw Error("langevin_chain: target has no gradient");
  if (cfg.step_scale * cfg.step_scale > 0.5)
    warn(chain_tag(cfg) + ": Langevin sigma^2 = " + std::to_string(cfg.step_scale * cfg.step_scale) +
         " is not small; discretization bias may dominate");
  Rng rng(cfg.seed);
  DrawStore out(target.dim);
  out.reserve(static_cast<std::size_t>(cfg.iterations / cfg.thin));
  Vector theta = draw_initial_state(cfg.init, target.dim, rng);
  for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
    theta = langevin_step(target, theta, cfg.step_scale, rng);
    if (!theta.allFinite())
      throw Error(chain_tag(cfg) + ": Langevin state diverged at iteration " + std::to_string(it));
    if (keep(cfg, it)) out.append(cfg.chain_id, it, theta, it <= cfg.burn_in);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random-walk Metropolis

DrawStore rwm_chain(const Target& target, const ChainConfig& cfg, ChainStats* stats) {
  cfg.validate();
  const int p = target.dim;
  Rng rng(cfg.seed);
  Matrix shape = Matrix::Identity(p, p);
  if (cfg.proposal_covariance) {
    check_dim("rwm proposal covariance", p, cfg.proposal_covariance->rows());
    Eigen::LLT<Matrix> llt(*cfg.proposal_covariance);
    if (llt.info() != Eigen::Success) throw Error("rwm_chain: proposal covariance not positive definite");
    shape = llt.matrixL();
  }
  const std::int64_t window = cfg.adapt ? cfg.adapt_window : 0;
  const std::int64_t flagged = std::max(cfg.burn_in, window);

  Vector theta = draw_initial_state(cfg.init, p, rng);
  double logp = target.log_g(theta);
  if (logp == -std::numeric_limits<double>::infinity())
    throw Error(chain_tag(cfg) + ": initial state outside the target support");
  double log_scale = std::log(cfg.step_scale);
  std::int64_t accepted = 0;
  std::int64_t counted = 0;

  DrawStore out(p);
  out.reserve(static_cast<std::size_t>(cfg.iterations / cfg.thin));
  Vector proposal(p);
  for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
    proposal = theta + std::exp(log_scale) * (shape * rng.normal_vector(p));
    const double logq = target.log_g(proposal);
    const double log_ratio = logq - logp;
    const bool accept = std::log(rng.uniform()) < log_ratio;
    if (accept) {
      theta = proposal;
      logp = logq;
    }
    if (it <= window) {
      const double alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
      log_scale += (alpha - cfg.target_accept) / static_cast<double>(it);
    } else {
      ++counted;
      accepted += accept ? 1 : 0;
    }
    if (keep(cfg, it)) out.append(cfg.chain_id, it, theta, it <= flagged);
  }
  if (stats) {
    stats->acceptance_rate = counted > 0 ? static_cast<double>(accepted) / counted : 0.0;
    stats->final_scale = std::exp(log_scale);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Truncated normal and probit Gibbs

double sample_normal_above(double a, Rng& rng) {
  if (a <= 0.0) {
    // Acceptance probability is at least 1/2.
    while (true) {
      const double z = rng.normal();
      if (z > a) return z;
    }
  }
  if (a <= 5.0) {
    const double tail = 0.5 * std::erfc(a * 0.70710678118654752440);
    return -normal_quantile(rng.uniform() * tail);
  }
  // Exponential proposal with the optimal rate for the tail beyond a.
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  while (true) {
    const double z = a + rng.exponential(lambda);
    const double d = z - lambda;
    if (std::log(rng.uniform()) < -0.5 * d * d) return z;
  }
}

double sample_truncated_normal(double mean, bool positive, Rng& rng) {
  if (positive) return mean + sample_normal_above(-mean, rng);
  return mean - sample_normal_above(mean, rng);
}

ProbitBetaConditional::ProbitBetaConditional(const Matrix& X, const Vector& prior_variance) {
  const auto p = X.cols();
  const Vector v0 = prior_variance.size() == 1 ? Vector::Constant(p, prior_variance[0]) : prior_variance;
  check_dim("ProbitBetaConditional prior variance", p, v0.size());
  Matrix precision = X.transpose() * X;
  precision.diagonal() += v0.cwiseInverse();
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw Error("gibbs_probit_chain: X^T X + V0^{-1} is singular");
  covariance_ = llt.solve(Matrix::Identity(p, p));
  Eigen::LLT<Matrix> v_llt(covariance_);
  if (v_llt.info() != Eigen::Success) throw Error("gibbs_probit_chain: posterior covariance is singular");
  chol_ = v_llt.matrixL();
  mean_map_ = covariance_ * X.transpose();
}

Vector ProbitBetaConditional::sample(const Vector& z, Rng& rng) const {
  Vector beta = mean_map_ * z;
  beta.noalias() += chol_ * rng.normal_vector(chol_.rows());
  return beta;
}

DrawStore gibbs_probit_chain(const ProbitModel& model, const ChainConfig& cfg) {
  cfg.validate();
  const int p = model.dim();
  const Matrix& X = model.X();

  // Rows with an all-zero covariate vector do not enter X^T z, so their
  // latent variables are integrated out rather than sampled.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (!X.row(i).isZero(0.0)) active.push_back(i);
  const auto n_active = static_cast<Eigen::Index>(active.size());
  Matrix Xa(n_active, p);
  std::vector<bool> positive(active.size());
  for (Eigen::Index r = 0; r < n_active; ++r) {
    Xa.row(r) = X.row(active[static_cast<std::size_t>(r)]);
    positive[static_cast<std::size_t>(r)] = model.y()[static_cast<std::size_t>(active[static_cast<std::size_t>(r)])] == 1;
  }

  const ProbitBetaConditional conditional(Xa, model.prior_variance());

  Rng rng(cfg.seed);
  DrawStore out(p);
  out.reserve(static_cast<std::size_t>(cfg.iterations / cfg.thin));
  Vector beta = draw_initial_state(cfg.init, p, rng);
  Vector z(n_active);
  Vector eta(n_active);
  for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
    eta.noalias() = Xa * beta;
    for (Eigen::Index r = 0; r < n_active; ++r)
      z[r] = sample_truncated_normal(eta[r], positive[static_cast<std::size_t>(r)], rng);
    beta = conditional.sample(z, rng);
    if (keep(cfg, it)) out.append(cfg.chain_id, it, beta, it <= cfg.burn_in);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

Trajectory t4_trajectory(const MvtDist& q_center, const Target& target,
                         const TrajectoryOptions& opts, Rng& rng) {
  if (opts.length < 1) throw Error("t4_trajectory: length must be >= 1");
  if (!(opts.sigma >= 0.0)) throw Error("t4_trajectory: sigma must be non-negative");
  check_dim("t4_trajectory", target.dim, q_center.dim());
  const bool use_drift = opts.drift && opts.sigma > 0.0;
  if (use_drift && !target.has_gradient())
    throw Error("t4_trajectory: drift requires a target gradient");

  Trajectory tr;
  tr.seed = rng.seed();
  tr.states.reserve(static_cast<std::size_t>(opts.length));
  tr.log_instrumental.reserve(static_cast<std::size_t>(opts.length));
  Vector theta = q_center.sample(rng);
  const double log_q1 = q_center.log_density(theta);
  tr.states.push_back(theta);
  tr.log_instrumental.push_back(log_q1);
  tr.log_forward_density = log_q1;
  if (opts.sigma == 0.0) {
    // Degenerate path: every state repeats the first draw.
    for (int t = 1; t < opts.length; ++t) {
      tr.states.push_back(theta);
      tr.log_instrumental.push_back(log_q1);
    }
    return tr;
  }

  const int p = target.dim;
  const MvtDist innovation = MvtDist::standard(p, opts.innovation_nu);
  const double log_jacobian = static_cast<double>(p) * std::log(opts.sigma);
  const double half_var = 0.5 * opts.sigma * opts.sigma;
  for (int t = 1; t < opts.length; ++t) {
    Vector center = theta;
    if (use_drift) center += half_var * target.grad_log_g(theta);
    const Vector eta = innovation.sample(rng);
    theta = center + opts.sigma * eta;
    const double log_q = innovation.log_density(eta) - log_jacobian;
    tr.states.push_back(theta);
    tr.log_instrumental.push_back(log_q);
    tr.log_forward_density += log_q;
  }
  return tr;
}

}  // namespace pmcmc
