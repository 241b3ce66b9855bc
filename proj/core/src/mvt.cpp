#include "pmcmc/mvt.hpp"

#include <cmath>

#include "pmcmc/rng.hpp"
#include "pmcmc/special.hpp"

namespace pmcmc {

MvtDist::MvtDist(Vector location, Matrix scale, double nu, double inflation)
    : location_(std::move(location)), scale_(std::move(scale)), nu_(nu), inflation_(inflation) {
  const auto p = location_.size();
  if (p < 1) throw Error("MvtDist: empty location");
  check_dim("MvtDist scale", p, scale_.rows());
  check_dim("MvtDist scale", p, scale_.cols());
  if (!(nu_ > 0.0)) throw Error("MvtDist: degrees of freedom must be positive");
  if (!(inflation_ > 0.0) || !std::isfinite(inflation_))
    throw Error("MvtDist: inflation must be positive");
  Eigen::LLT<Matrix> llt(inflation_ * 0.5 * (scale_ + scale_.transpose()));
  if (llt.info() != Eigen::Success) throw Error("MvtDist: scale matrix is not positive definite");
  chol_ = llt.matrixL();
  const double pd = static_cast<double>(p);
  const double log_det_half = chol_.diagonal().array().log().sum();
  if (is_normal()) {
    log_norm_ = -pd * kLogSqrt2Pi - log_det_half;
  } else {
    log_norm_ = std::lgamma(0.5 * (nu_ + pd)) - std::lgamma(0.5 * nu_) -
                0.5 * pd * std::log(nu_ * M_PI) - log_det_half;
  }
}

MvtDist MvtDist::standard(int p, double nu) {
  return MvtDist(Vector::Zero(p), Matrix::Identity(p, p), nu, 1.0);
}

double MvtDist::log_density(const Vector& x) const {
  check_dim("MvtDist::log_density", location_.size(), x.size());
  const double q = chol_.triangularView<Eigen::Lower>().solve(x - location_).squaredNorm();
  if (is_normal()) return log_norm_ - 0.5 * q;
  return log_norm_ - 0.5 * (nu_ + static_cast<double>(x.size())) * std::log1p(q / nu_);
}

Vector MvtDist::sample(Rng& rng) const {
  Vector z = rng.normal_vector(location_.size());
  if (!is_normal()) z /= std::sqrt(rng.chi_squared(nu_) / nu_);
  return location_ + chol_ * z;
}

Matrix MvtDist::covariance() const {
  const Matrix s = chol_ * chol_.transpose();
  if (is_normal()) return s;
  if (nu_ <= 2.0) return Matrix::Constant(s.rows(), s.cols(), std::numeric_limits<double>::infinity());
  return nu_ / (nu_ - 2.0) * s;
}

}  // namespace pmcmc
