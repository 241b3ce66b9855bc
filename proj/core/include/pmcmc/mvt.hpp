#pragma once

#include <limits>

#include "pmcmc/types.hpp"

namespace pmcmc {

class Rng;

/// Multivariate Student-t instrumental distribution t_nu(location, inflation * S).
///
/// nu = infinity gives the normal limit. Sample covariance is
/// inflation * nu / (nu - 2) * S for nu > 2.
class MvtDist {
 public:
  static constexpr double kNormal = std::numeric_limits<double>::infinity();

  MvtDist(Vector location, Matrix scale, double nu = 4.0, double inflation = 1.0);

  /// Standard t_nu on R^p (location 0, scale I).
  static MvtDist standard(int p, double nu = 4.0);

  int dim() const { return static_cast<int>(location_.size()); }
  const Vector& location() const { return location_; }
  /// Scale matrix before inflation.
  const Matrix& scale() const { return scale_; }
  double nu() const { return nu_; }
  double inflation() const { return inflation_; }
  bool is_normal() const { return nu_ == kNormal; }
  /// Lower Cholesky factor of inflation * scale.
  const Matrix& cholesky() const { return chol_; }

  double log_density(const Vector& x) const;
  Vector sample(Rng& rng) const;
  /// Covariance of the distribution (infinite entries when nu <= 2).
  Matrix covariance() const;

 private:
  Vector location_;
  Matrix scale_;
  double nu_;
  double inflation_;
  Matrix chol_;
  double log_norm_;
};

}  // namespace pmcmc
