#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pmcmc/draws.hpp"
#include "pmcmc/mvt.hpp"
#include "pmcmc/targets.hpp"
#include "pmcmc/types.hpp"

namespace pmcmc {

class Rng;

enum class Kernel { kLangevin, kRwm, kGibbsProbit };

struct UniformBox {
  Vector lo;
  Vector hi;
};

/// Chain starting point: a fixed point, uniform on a box, or a draw from a
/// distribution.
using Initializer = std::variant<Vector, UniformBox, MvtDist>;

Vector draw_initial_state(const Initializer& init, int dim, Rng& rng);

struct ChainConfig {
  Kernel kernel = Kernel::kRwm;
  int chain_id = 0;
  /// Langevin sigma, or the initial random-walk proposal scale.
  double step_scale = 0.1;
  std::int64_t iterations = 1000;
  /// Iterations 1..burn_in are flagged burn-in.
  std::int64_t burn_in = 0;
  std::uint64_t seed = 0;
  Initializer init = Vector{};
  /// Keep every thin-th iteration.
  int thin = 1;

  // Random-walk Metropolis only.
  bool adapt = true;
  std::int64_t adapt_window = 1000;
  double target_accept = 0.234;
  /// Proposal shape; spherical when empty.
  std::optional<Matrix> proposal_covariance;

  void validate() const;
};

struct ChainStats {
  double acceptance_rate = 0.0;  // post-adaptation
  double final_scale = 0.0;
};

/// One Euler-Maruyama step of d theta = sigma^2/2 grad log pi dt + sigma dW,
/// without Metropolis correction.
Vector langevin_step(const Target& target, const Vector& theta, double sigma, Rng& rng);

DrawStore langevin_chain(const Target& target, const ChainConfig& cfg);

/// Random-walk Metropolis. During the first adapt_window iterations the
/// log proposal scale follows a Robbins-Monro recursion with gain 1/t toward
/// the target acceptance rate; afterwards the scale is frozen. Adapted
/// iterations are flagged burn-in.
DrawStore rwm_chain(const Target& target, const ChainConfig& cfg, ChainStats* stats = nullptr);

/// beta | z ~ N(V X^T z, V) with V = (X^T X + V0^{-1})^{-1}.
class ProbitBetaConditional {
 public:
  ProbitBetaConditional(const Matrix& X, const Vector& prior_variance);
  const Matrix& covariance() const { return covariance_; }
  Vector mean(const Vector& z) const { return mean_map_ * z; }
  Vector sample(const Vector& z, Rng& rng) const;

 private:
  Matrix covariance_;
  Matrix chol_;
  Matrix mean_map_;
};

/// Albert-Chib data augmentation for probit regression with a N(0, V0) prior.
DrawStore gibbs_probit_chain(const ProbitModel& model, const ChainConfig& cfg);

/// Standard normal conditioned on being > a.
double sample_normal_above(double a, Rng& rng);
/// N(mean, 1) truncated to (0, inf) when positive, else (-inf, 0].
double sample_truncated_normal(double mean, bool positive, Rng& rng);

/// Short path started from an instrumental and moved by Langevin drift plus
/// scaled multivariate t innovations.
struct Trajectory {
  std::vector<Vector> states;
  /// log of the per-state instrumental density: q_center for the first
  /// state, the one-step innovation density given the previous state after.
  std::vector<double> log_instrumental;
  /// Joint log density of the whole path.
  double log_forward_density = 0.0;
  std::uint64_t seed = 0;
};

struct TrajectoryOptions {
  int length = 5;
  double sigma = 1.0;
  bool drift = true;
  double innovation_nu = 4.0;
};

Trajectory t4_trajectory(const MvtDist& q_center, const Target& target,
                         const TrajectoryOptions& opts, Rng& rng);

}  // namespace pmcmc
