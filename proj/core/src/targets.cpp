#include "pmcmc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "pmcmc/rng.hpp"
#include "pmcmc/special.hpp"

namespace pmcmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix checked_cholesky(const Matrix& s, const std::string& what) {
  if (s.rows() != s.cols()) throw Error(what + ": covariance is not square");
  if (!s.isApprox(s.transpose(), 1e-10)) throw Error(what + ": covariance is not symmetric");
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw Error(what + ": covariance is not positive definite");
  Matrix l = llt.matrixL();
  if ((l.diagonal().array() <= 0.0).any())
    throw Error(what + ": covariance is not positive definite");
  return l;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// GaussianMixture

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Matrix> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  if (weights_.empty()) throw Error("GaussianMixture: no components");
  if (means_.size() != weights_.size() || covariances_.size() != weights_.size())
    throw Error("GaussianMixture: weights, means and covariances differ in length");
  dim_ = static_cast<int>(means_.front().size());
  if (dim_ < 1) throw Error("GaussianMixture: empty mean vector");
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw Error("GaussianMixture: weights do not sum to 1");
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (!(weights_[k] > 0.0)) throw Error("GaussianMixture: weights must be positive");
    check_dim("GaussianMixture mean", dim_, means_[k].size());
    check_dim("GaussianMixture covariance", dim_, covariances_[k].rows());
    Matrix l = checked_cholesky(covariances_[k], "GaussianMixture");
    precision_.push_back(covariances_[k].llt().solve(Matrix::Identity(dim_, dim_)));
    log_norm_.push_back(std::log(weights_[k]) - l.diagonal().array().log().sum() -
                        dim_ * kLogSqrt2Pi);
    chol_.push_back(std::move(l));
  }
}

Vector GaussianMixture::mean() const {
  Vector m = Vector::Zero(dim_);
  for (std::size_t k = 0; k < weights_.size(); ++k) m += weights_[k] * means_[k];
  return m;
}

std::vector<double> GaussianMixture::component_log_terms(const Vector& theta) const {
  check_dim("mixture_log_density", dim_, theta.size());
  std::vector<double> terms(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const Vector z = chol_[k].triangularView<Eigen::Lower>().solve(theta - means_[k]);
    terms[k] = log_norm_[k] - 0.5 * z.squaredNorm();
  }
  return terms;
}

Vector GaussianMixture::sample(Rng& rng, int* component) const {
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < weights_.size(); ++k) {
    if (u < weights_[k]) break;
    u -= weights_[k];
  }
  if (component) *component = static_cast<int>(k);
  return means_[k] + chol_[k] * rng.normal_vector(dim_);
}

Target GaussianMixture::as_target() const {
  auto self = std::make_shared<const GaussianMixture>(*this);
  Target t;
  t.dim = dim_;
  t.log_g = [self](const Vector& x) { return mixture_log_density(*self, x); };
  t.grad_log_g = [self](const Vector& x) { return mixture_grad_log_density(*self, x); };
  t.support_description = std::to_string(components()) + "-component Gaussian mixture on R^" +
                          std::to_string(dim_);
  return t;
}

double mixture_log_density(const GaussianMixture& m, const Vector& theta) {
  const auto terms = m.component_log_terms(theta);
  return log_sum_exp(terms);
}

Vector mixture_grad_log_density(const GaussianMixture& m, const Vector& theta) {
  const auto terms = m.component_log_terms(theta);
  const double total = log_sum_exp(terms);
  Vector g = Vector::Zero(m.dim());
  for (int k = 0; k < m.components(); ++k) {
    const double r = std::exp(terms[static_cast<std::size_t>(k)] - total);
    g += r * (m.precision(k) * (m.means()[static_cast<std::size_t>(k)] - theta));
  }
  return g;
}

GaussianMixture four_mode_mixture() {
  std::vector<Vector> means(4, Vector(2));
  means[0] << 3, 3;
  means[1] << 7, -3;
  means[2] << 2, 7;
  means[3] << -5, 0;
  std::vector<Matrix> covs(4, Matrix(2, 2));
  covs[0] << 1.0, 0.2, 0.2, 1.0;
  covs[1] << 2.0, -0.5, -0.5, 0.5;
  covs[2] << 1.3, 0.3, 0.3, 0.4;
  covs[3] << 1.0, 1.0, 1.0, 2.5;
  return GaussianMixture({0.02, 0.20, 0.20, 0.58}, std::move(means), std::move(covs));
}

GaussianMixture random_mixture(int p, int K, std::uint64_t seed, double cov_scale) {
  if (p < 1 || K < 1) throw Error("random_mixture: p and K must be positive");
  if (!(cov_scale > 0.0)) throw Error("random_mixture: cov_scale must be positive");
  Rng rng(derive_seed(seed, StreamDomain::kMixture, 0));
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  std::vector<double> weights;
  for (int k = 0; k < K; ++k) {
    Vector mu(p);
    for (int i = 0; i < p; ++i) mu[i] = rng.uniform(-10.0, 10.0);
    means.push_back(std::move(mu));
  }
  for (int k = 0; k < K; ++k) {
    Matrix L(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) L(i, j) = rng.normal();
    const Matrix A = L.transpose() * L;
    const Vector d = A.diagonal().array().rsqrt();
    Matrix c = d.asDiagonal() * A * d.asDiagonal();
    c = 0.5 * (c + c.transpose());
    c.diagonal().setOnes();
    covs.push_back(cov_scale * c);
  }
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    weights.push_back(rng.exponential(1.0));
    total += weights.back();
  }
  for (double& w : weights) w /= total;
  // Absorb rounding so the simplex check holds to the last bit we can manage.
  weights.back() = 1.0 - std::accumulate(weights.begin(), weights.end() - 1, 0.0);
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

// ---------------------------------------------------------------------------
// ProbitModel

ProbitModel::ProbitModel(Matrix X, std::vector<int> y, Vector prior_variance)
    : X_(std::move(X)), y_(std::move(y)), prior_variance_(std::move(prior_variance)) {
  if (static_cast<Eigen::Index>(y_.size()) != X_.rows())
    throw Error("ProbitModel: X and y have different numbers of rows");
  if (X_.cols() < 1) throw Error("ProbitModel: no covariates");
  if (prior_variance_.size() == 1 && X_.cols() > 1)
    prior_variance_ = Vector::Constant(X_.cols(), prior_variance_[0]);
  check_dim("ProbitModel prior_variance", X_.cols(), prior_variance_.size());
  if ((prior_variance_.array() <= 0.0).any())
    throw Error("ProbitModel: prior variance must be positive");
  for (int v : y_)
    if (v != 0 && v != 1) throw Error("ProbitModel: responses must be 0 or 1");

  std::map<std::vector<double>, std::size_t> index;
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    std::vector<double> key;
    key.reserve(static_cast<std::size_t>(X_.cols()) + 1);
    for (Eigen::Index j = 0; j < X_.cols(); ++j) key.push_back(X_(i, j));
    key.push_back(y_[static_cast<std::size_t>(i)]);
    auto [it, inserted] = index.emplace(std::move(key), groups_.size());
    if (inserted)
      groups_.push_back({X_.row(i).transpose(), y_[static_cast<std::size_t>(i)], 1.0});
    else
      groups_[it->second].count += 1.0;
  }
}

double ProbitModel::log_prior(const Vector& beta) const {
  check_dim("probit_log_posterior", dim(), beta.size());
  double lp = 0.0;
  for (int k = 0; k < dim(); ++k)
    lp += -0.5 * beta[k] * beta[k] / prior_variance_[k] - 0.5 * std::log(prior_variance_[k]) -
          kLogSqrt2Pi;
  return lp;
}

double ProbitModel::log_likelihood(const Vector& beta) const {
  check_dim("probit_log_posterior", dim(), beta.size());
  double ll = 0.0;
  for (const auto& g : groups_) {
    const double eta = g.x.dot(beta);
    ll += g.count * log_normal_cdf(g.y == 1 ? eta : -eta);
  }
  return ll;
}

Vector ProbitModel::grad_log_posterior(const Vector& beta) const {
  check_dim("probit gradient", dim(), beta.size());
  Vector grad = -(beta.array() / prior_variance_.array()).matrix();
  for (const auto& g : groups_) {
    const double s = g.y == 1 ? 1.0 : -1.0;
    grad += g.count * s * inverse_mills(s * g.x.dot(beta)) * g.x;
  }
  return grad;
}

Target ProbitModel::as_target() const {
  auto self = std::make_shared<const ProbitModel>(*this);
  Target t;
  t.dim = dim();
  t.log_g = [self](const Vector& b) { return probit_log_posterior(*self, b); };
  t.grad_log_g = [self](const Vector& b) { return self->grad_log_posterior(b); };
  t.support_description = "probit regression posterior on R^" + std::to_string(dim());
  return t;
}

double probit_log_posterior(const ProbitModel& m, const Vector& beta) {
  return m.log_prior(beta) + m.log_likelihood(beta);
}

ProbitData simulate_probit_one(Eigen::Index n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, StreamDomain::kSimulate, 1));
  ProbitData d;
  d.beta_true = Vector::Constant(1, 5.0 / std::sqrt(2.0));
  d.X.resize(n, 1);
  d.y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    d.X(i, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    d.y[static_cast<std::size_t>(i)] = d.X(i, 0) * d.beta_true[0] + rng.normal() > 0.0 ? 1 : 0;
  }
  return d;
}

ProbitData simulate_probit_eight(Eigen::Index n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, StreamDomain::kSimulate, 8));
  ProbitData d;
  d.beta_true.resize(8);
  d.beta_true << 0.25, 5.0, 1.0, -1.5, -0.1, 0.0, 0.0, 0.0;
  d.X.resize(n, 8);
  d.y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    d.X(i, 2) = rng.uniform();
    d.X(i, 3) = rng.normal();
    d.X(i, 4) = rng.exponential(1.0);
    d.X(i, 5) = 5.0 + rng.normal();
    d.X(i, 6) = static_cast<double>(rng.poisson(10.0));
    d.X(i, 7) = 20.0 + 5.0 * rng.normal();
    const double eta = d.X.row(i).dot(d.beta_true);
    d.y[static_cast<std::size_t>(i)] = eta + rng.normal() > 0.0 ? 1 : 0;
  }
  return d;
}

void write_probit_csv(const std::filesystem::path& path, const Matrix& X,
                      const std::vector<int>& y) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "y";
  for (Eigen::Index j = 0; j < X.cols(); ++j) out << ",x_" << (j + 1);
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out << y[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << ',' << X(i, j);
    out << '\n';
  }
}

ProbitData read_probit_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read probit data " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "y")
    throw Error(path.string() + ": expected header y,x_1,...,x_p");
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  std::vector<std::vector<double>> rows;
  ProbitData d;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != p + 1)
      throw Error(path.string() + ": ragged row");
    d.y.push_back(std::stoi(cells[0]));
    std::vector<double> r;
    for (Eigen::Index j = 0; j < p; ++j) r.push_back(std::stod(cells[static_cast<std::size_t>(j + 1)]));
    rows.push_back(std::move(r));
  }
  d.X.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < p; ++j) d.X(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return d;
}

// ---------------------------------------------------------------------------
// LohModel

LohModel::LohModel(std::vector<LohObservation> data, double prior_bound)
    : data_(std::move(data)), prior_bound_(prior_bound) {
  if (data_.empty()) throw Error("LohModel: no observations");
  for (const auto& o : data_) {
    if (o.n < 0 || o.x < 0 || o.x > o.n) throw Error("LohModel: need 0 <= x_i <= n_i");
    log_binom_.push_back(std::lgamma(o.n + 1.0) - std::lgamma(o.x + 1.0) -
                         std::lgamma(o.n - o.x + 1.0));
  }
}

double LohModel::omega2(double gamma) { return 0.5 * logistic(gamma); }

Vector LohModel::natural_parameters(const Vector& theta) {
  check_dim("LohModel", 4, theta.size());
  Vector out(4);
  out << logistic(theta[0]), logistic(theta[1]), logistic(theta[2]), theta[3];
  return out;
}

double LohModel::log_likelihood(const Vector& theta) const {
  check_dim("loh_log_posterior", 4, theta.size());
  const double log_eta = log_sigmoid(theta[0]);
  const double log_1m_eta = log_sigmoid(-theta[0]);
  const double log_pi1 = log_sigmoid(theta[1]);
  const double log_1m_pi1 = log_sigmoid(-theta[1]);
  const double pi2 = logistic(theta[2]);
  const double w2 = omega2(theta[3]);
  const double a = pi2 / w2;
  const double b = logistic(-theta[2]) / w2;
  const double log_beta_ab = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double ll = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double x = data_[i].x;
    const double n = data_[i].n;
    const double binom = log_eta + log_binom_[i] + x * log_pi1 + (n - x) * log_1m_pi1;
    const double betabin = log_1m_eta + log_binom_[i] + std::lgamma(x + a) +
                           std::lgamma(n - x + b) - std::lgamma(n + a + b) - log_beta_ab;
    ll += log_add_exp(binom, betabin);
  }
  return ll;
}

Target LohModel::as_target() const {
  auto self = std::make_shared<const LohModel>(*this);
  Target t;
  t.dim = 4;
  t.log_g = [self](const Vector& th) { return loh_log_posterior(*self, th); };
  t.support_description = "LOH mixture posterior on (logit eta, logit pi1, logit pi2, gamma) in (-" +
                          std::to_string(prior_bound_) + ", " + std::to_string(prior_bound_) + ")^4";
  return t;
}

double loh_log_posterior(const LohModel& m, const Vector& theta) {
  check_dim("loh_log_posterior", 4, theta.size());
  if (!theta.allFinite()) throw Error("loh_log_posterior: non-finite input");
  const double bound = m.prior_bound();
  if ((theta.array().abs() >= bound).any()) return kNegInf;
  return m.log_likelihood(theta) - 4.0 * std::log(2.0 * bound);
}

std::vector<LohObservation> read_loh_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read LOH data " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"x", "n"})
    throw Error(path.string() + ": expected header x,n");
  std::vector<LohObservation> data;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw Error(path.string() + ": expected two columns");
    data.push_back({std::stoi(cells[0]), std::stoi(cells[1])});
  }
  return data;
}

void write_loh_csv(const std::filesystem::path& path, const std::vector<LohObservation>& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "x,n\n";
  for (const auto& o : data) out << o.x << ',' << o.n << '\n';
}

std::vector<LohObservation> simulate_loh(int rows, std::uint64_t seed, double eta, double pi1,
                                         double pi2, double gamma) {
  Rng rng(derive_seed(seed, StreamDomain::kSimulate, 40));
  const double w2 = LohModel::omega2(gamma);
  std::gamma_distribution<double> ga(pi2 / w2, 1.0);
  std::gamma_distribution<double> gb((1.0 - pi2) / w2, 1.0);
  std::vector<LohObservation> data;
  for (int i = 0; i < rows; ++i) {
    const int n = 10 + static_cast<int>(rng.below(41));
    double p = pi1;
    if (rng.uniform() >= eta) {
      const double u = ga(rng);
      const double v = gb(rng);
      p = u / (u + v);
    }
    std::binomial_distribution<int> bin(n, p);
    data.push_back({bin(rng), n});
  }
  return data;
}

// ---------------------------------------------------------------------------
// Generic helpers

Vector finite_difference_gradient(const Target& t, const Vector& theta, double h) {
  Vector g(theta.size());
  Vector x = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    x[i] = theta[i] + h;
    const double up = t.log_g(x);
    x[i] = theta[i] - h;
    const double down = t.log_g(x);
    x[i] = theta[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Matrix finite_difference_hessian(const Target& t, const Vector& theta, double h) {
  const Eigen::Index p = theta.size();
  Matrix H(p, p);
  Vector x = theta;
  if (t.has_gradient()) {
    for (Eigen::Index i = 0; i < p; ++i) {
      x[i] = theta[i] + h;
      const Vector up = t.grad_log_g(x);
      x[i] = theta[i] - h;
      const Vector down = t.grad_log_g(x);
      x[i] = theta[i];
      H.col(i) = (up - down) / (2.0 * h);
    }
  } else {
    const double f0 = t.log_g(theta);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = i; j < p; ++j) {
        auto f = [&](double di, double dj) {
          Vector y = theta;
          y[i] += di;
          y[j] += dj;
          return t.log_g(y);
        };
        if (i == j) {
          H(i, i) = (f(h, 0) - 2.0 * f0 + f(-h, 0)) / (h * h);
        } else {
          H(i, j) = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
          H(j, i) = H(i, j);
        }
      }
    }
  }
  return 0.5 * (H + H.transpose());
}

Vector find_mode(const Target& t, const Vector& start, int max_iter) {
  check_dim("find_mode", t.dim, start.size());
  Vector x = start;
  double fx = t.log_g(x);
  if (!std::isfinite(fx)) throw Error("find_mode: log density is not finite at the start point");
  for (int it = 0; it < max_iter; ++it) {
    const Vector g = t.has_gradient() ? t.grad_log_g(x) : finite_difference_gradient(t, x);
    if (g.norm() < 1e-9 * (1.0 + std::abs(fx))) break;
    const Matrix H = finite_difference_hessian(t, x);
    Eigen::LLT<Matrix> llt(-H);
    Vector step = llt.info() == Eigen::Success ? Vector(llt.solve(g)) : Vector(g);
    double scale = 1.0;
    bool improved = false;
    for (int k = 0; k < 60; ++k, scale *= 0.5) {
      const Vector y = x + scale * step;
      const double fy = t.log_g(y);
      if (std::isfinite(fy) && fy >= fx) {
        improved = (y - x).norm() > 1e-14 * (1.0 + x.norm());
        x = y;
        fx = fy;
        break;
      }
    }
    if (!improved) break;
  }
  return x;
}

}  // namespace pmcmc
