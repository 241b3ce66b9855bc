#include "pmcmc/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

namespace pmcmc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt1_2 = 0.70710678118654752440;
}  // namespace

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -kInf;
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kSqrt1_2); }

double log_normal_cdf(double z) {
  if (z > 6.0) return std::log1p(-0.5 * std::erfc(z * kSqrt1_2));
  if (z > -20.0) return std::log(0.5 * std::erfc(-z * kSqrt1_2));
  // Phi(z) = phi(z)/|z| * (1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - ...)
  const double r = 1.0 / (z * z);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return -0.5 * z * z - kLogSqrt2Pi - std::log(-z) + std::log(series);
}

double normal_quantile(double p) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double inverse_mills(double z) {
  const double log_phi = -0.5 * z * z - kLogSqrt2Pi;
  return std::exp(log_phi - log_normal_cdf(z));
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double mvn_log_density(const Vector& x, const Vector& mean, const Matrix& chol_lower) {
  const Vector z = chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  const double log_det = chol_lower.diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - log_det - static_cast<double>(x.size()) * kLogSqrt2Pi;
}

}  // namespace pmcmc
