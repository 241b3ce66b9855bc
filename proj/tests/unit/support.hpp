#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pmcmc/partition.hpp"
#include "pmcmc/types.hpp"

namespace testing {

inline double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double standard_error(const std::vector<double>& x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

/// Adaptive Gauss-Kronrod on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-11) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

/// The y-interval of the Voronoi cell of center j (identity coordinates,
/// unit normalization) on the vertical line at x, clipped to [lo, hi].
/// Each competing center k contributes the half-plane
///   2 (c_k - c_j) . (x, y) <= |c_k|^2 - |c_j|^2.
inline std::pair<double, double> cell_slice(const std::vector<pmcmc::Vector>& centers, std::size_t j, double x,
                                            double lo, double hi) {
  const auto& cj = centers[j];
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (k == j) continue;
    const auto& ck = centers[k];
    const double a = 2.0 * (ck[1] - cj[1]);
    const double rhs = ck.squaredNorm() - cj.squaredNorm() - 2.0 * (ck[0] - cj[0]) * x;
    if (a > 0.0) hi = std::min(hi, rhs / a);
    else if (a < 0.0) lo = std::max(lo, rhs / a);
    else if (rhs < 0.0) return {0.0, 0.0};
  }
  return {lo, hi};
}

/// Integral of f over the Voronoi cell of center j inside [-L, L]^2.
inline double integrate_cell(const std::function<double(double, double)>& f,
                             const std::vector<pmcmc::Vector>& centers, std::size_t j, double L = 25.0) {
  auto inner = [&](double x) {
    const auto [lo, hi] = cell_slice(centers, j, x, -L, L);
    if (!(hi > lo)) return 0.0;
    return integrate([&](double y) { return f(x, y); }, lo, hi, 1e-12);
  };
  return integrate(inner, -L, L, 1e-10);
}

}  // namespace testing
