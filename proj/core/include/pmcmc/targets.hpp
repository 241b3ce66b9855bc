#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pmcmc/types.hpp"

namespace pmcmc {

class Rng;

/// Unnormalized target density g on R^p; pi = g / c.
///
/// log_g must return a finite value or -inf (never NaN) for finite input.
/// Targets are immutable after construction and may be evaluated from many
/// workers at once.
struct Target {
  int dim = 0;
  std::function<double(const Vector&)> log_g;
  std::function<Vector(const Vector&)> grad_log_g;  // empty when unavailable
  std::string support_description;

  bool has_gradient() const { return static_cast<bool>(grad_log_g); }
  double operator()(const Vector& theta) const { return log_g(theta); }
};

// ---------------------------------------------------------------------------
// Gaussian mixtures

class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                  std::vector<Matrix> covariances);

  int dim() const { return dim_; }
  int components() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }
  const Matrix& cholesky(int k) const { return chol_[static_cast<std::size_t>(k)]; }
  const Matrix& precision(int k) const { return precision_[static_cast<std::size_t>(k)]; }

  /// Overall mean sum_k w_k mu_k.
  Vector mean() const;
  /// Per-component log(w_k N(theta; mu_k, Sigma_k)).
  std::vector<double> component_log_terms(const Vector& theta) const;
  /// Draws a component index and a point from it.
  Vector sample(Rng& rng, int* component = nullptr) const;

  Target as_target() const;

 private:
  int dim_;
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> chol_;
  std::vector<Matrix> precision_;
  std::vector<double> log_norm_;
};

double mixture_log_density(const GaussianMixture& m, const Vector& theta);
Vector mixture_grad_log_density(const GaussianMixture& m, const Vector& theta);

/// The four-component bivariate mixture used as the multimodal benchmark.
GaussianMixture four_mode_mixture();

/// Random K-component mixture on R^p: means uniform on (-10,10)^p, weights
/// Dirichlet(1,...,1), covariances cov_scale * D^{-1/2} A D^{-1/2} with
/// A = L^T L and L a p x p matrix of iid N(0,1) entries.
GaussianMixture random_mixture(int p, int K, std::uint64_t seed, double cov_scale = 1.0);

// ---------------------------------------------------------------------------
// Probit regression

class ProbitModel {
 public:
  /// prior_variance has one entry per coefficient (or a single entry that is
  /// broadcast).
  ProbitModel(Matrix X, std::vector<int> y, Vector prior_variance);

  int dim() const { return static_cast<int>(X_.cols()); }
  Eigen::Index observations() const { return X_.rows(); }
  const Matrix& X() const { return X_; }
  const std::vector<int>& y() const { return y_; }
  const Vector& prior_variance() const { return prior_variance_; }

  double log_prior(const Vector& beta) const;
  double log_likelihood(const Vector& beta) const;
  Vector grad_log_posterior(const Vector& beta) const;

  /// Distinct (row, response) pairs with multiplicities. Duplicate rows are
  /// common with discrete covariates and make likelihood evaluation cheap.
  struct Group {
    Vector x;
    int y;
    double count;
  };
  const std::vector<Group>& groups() const { return groups_; }

  Target as_target() const;

 private:
  Matrix X_;
  std::vector<int> y_;
  Vector prior_variance_;
  std::vector<Group> groups_;
};

double probit_log_posterior(const ProbitModel& m, const Vector& beta);

struct ProbitData {
  Matrix X;
  std::vector<int> y;
  Vector beta_true;
};

/// One Bernoulli(1/2) covariate, no intercept, beta = 5/sqrt(2).
ProbitData simulate_probit_one(Eigen::Index n, std::uint64_t seed);
/// Eight covariates (1, Bern(1/2), U(0,1), N(0,1), Exp(1), N(5,1), Pois(10),
/// N(20, 25)) and beta = (0.25, 5, 1, -1.5, -0.1, 0, 0, 0).
ProbitData simulate_probit_eight(Eigen::Index n, std::uint64_t seed);

void write_probit_csv(const std::filesystem::path& path, const Matrix& X,
                      const std::vector<int>& y);
/// Reads `y,x_1,...,x_p`.
ProbitData read_probit_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Loss-of-heterozygosity mixture model

struct LohObservation {
  int x;  // loss count
  int n;  // sample size
};

/// X_i ~ eta Bin(n_i, pi1) + (1 - eta) BetaBin(n_i, pi2, gamma), parametrized
/// by theta = (logit eta, logit pi1, logit pi2, gamma) with independent
/// U(-30, 30) priors on each coordinate.
class LohModel {
 public:
  explicit LohModel(std::vector<LohObservation> data, double prior_bound = 30.0);

  const std::vector<LohObservation>& data() const { return data_; }
  double prior_bound() const { return prior_bound_; }

  /// omega_2 = e^gamma / (2 (1 + e^gamma)).
  static double omega2(double gamma);
  /// (eta, pi1, pi2, gamma) from the unconstrained vector.
  static Vector natural_parameters(const Vector& theta);

  double log_likelihood(const Vector& theta) const;
  Target as_target() const;

 private:
  std::vector<LohObservation> data_;
  std::vector<double> log_binom_;
  double prior_bound_;
};

double loh_log_posterior(const LohModel& m, const Vector& theta);

std::vector<LohObservation> read_loh_csv(const std::filesystem::path& path);
void write_loh_csv(const std::filesystem::path& path, const std::vector<LohObservation>& data);
/// Stand-in data drawn from the model at the given natural parameters.
std::vector<LohObservation> simulate_loh(int rows, std::uint64_t seed, double eta, double pi1,
                                         double pi2, double gamma);

// ---------------------------------------------------------------------------
// Helpers on generic targets

/// Central finite-difference gradient.
Vector finite_difference_gradient(const Target& t, const Vector& theta, double h = 1e-5);
/// Hessian of log g by central differences of the gradient (or of log g when
/// no gradient is available).
Matrix finite_difference_hessian(const Target& t, const Vector& theta, double h = 1e-4);
/// Damped Newton ascent on log g from `start`.
Vector find_mode(const Target& t, const Vector& start, int max_iter = 100);

}  // namespace pmcmc
