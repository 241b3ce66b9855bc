#pragma once

#include <span>

#include "pmcmc/types.hpp"

namespace pmcmc {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// log(sum(exp(x))); returns -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> x);
double log_add_exp(double a, double b);

double normal_cdf(double z);
/// log Phi(z), accurate in both tails. The far lower tail (z < -20) uses the
/// asymptotic series of erfc, where the truncation error is below 1e-12.
double log_normal_cdf(double z);
/// Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);
/// phi(z) / Phi(z), finite for all z.
double inverse_mills(double z);

double log_sigmoid(double x);
double logistic(double x);
double logit(double p);

/// Log density of N(mean, L L^T) where `chol_lower` is L.
double mvn_log_density(const Vector& x, const Vector& mean, const Matrix& chol_lower);

}  // namespace pmcmc
