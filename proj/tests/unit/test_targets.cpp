#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pmcmc/rng.hpp"
#include "pmcmc/special.hpp"
#include "pmcmc/targets.hpp"
#include "support.hpp"

using namespace pmcmc;

namespace {

// Bivariate normal density from the explicit 2x2 inverse and determinant.
double bvn(double x, double y, double mx, double my, double sxx, double sxy, double syy) {
  const double det = sxx * syy - sxy * sxy;
  const double dx = x - mx, dy = y - my;
  const double q = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

double four_mode_mixture_density(double x, double y) {
  return 0.02 * bvn(x, y, 3, 3, 1, .2, 1) + 0.20 * bvn(x, y, 7, -3, 2, -.5, .5) +
         0.20 * bvn(x, y, 2, 7, 1.3, .3, .4) + 0.58 * bvn(x, y, -5, 0, 1, 1, 2.5);
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

double binomial_loglik(const std::vector<LohObservation>& d, double pi1) {
  double s = 0.0;
  for (const auto& o : d)
    s += std::lgamma(o.n + 1.0) - std::lgamma(o.x + 1.0) - std::lgamma(o.n - o.x + 1.0) + o.x * std::log(pi1) +
         (o.n - o.x) * std::log1p(-pi1);
  return s;
}

}  // namespace

TEST_SUITE("targets") {

TEST_CASE("four-mode mixture density at (3,3) matches direct summation") {
  const auto m = four_mode_mixture();
  const double expected = std::log(four_mode_mixture_density(3, 3));
  CHECK(mixture_log_density(m, Vector{{3.0, 3.0}}) == doctest::Approx(expected).epsilon(1e-13));
  for (auto [x, y] : {std::pair{0.0, 0.0}, {7.0, -3.0}, {-5.0, 0.0}, {10.0, 10.0}})
    CHECK(mixture_log_density(m, Vector{{x, y}}) == doctest::Approx(std::log(four_mode_mixture_density(x, y))).epsilon(1e-12));
}

TEST_CASE("single standard component at its mean gives -log(2 pi)") {
  GaussianMixture m({1.0}, {Vector::Zero(2)}, {Matrix::Identity(2, 2)});
  CHECK(mixture_log_density(m, Vector::Zero(2)) == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("symmetric two-component mixture is label invariant") {
  const Matrix S{{1.0, 0.3}, {0.3, 2.0}};
  GaussianMixture a({0.5, 0.5}, {Vector{{2.0, 0.0}}, Vector{{-2.0, 0.0}}}, {S, S});
  GaussianMixture b({0.5, 0.5}, {Vector{{-2.0, 0.0}}, Vector{{2.0, 0.0}}}, {S, S});
  CHECK(mixture_log_density(a, Vector::Zero(2)) == doctest::Approx(mixture_log_density(b, Vector::Zero(2))));
}

TEST_CASE("K=1 mixture equals closed-form normal log density") {
  Rng rng(3);
  const Matrix A = Matrix::Random(3, 3);
  const Matrix S = A * A.transpose() + Matrix::Identity(3, 3);
  const Vector mu{{1.0, -2.0, 0.5}};
  GaussianMixture m({1.0}, {mu}, {S});
  for (int i = 0; i < 20; ++i) {
    const Vector x = mu + 2.0 * rng.normal_vector(3);
    const Vector d = x - mu;
    const double closed = -1.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(S.determinant()) -
                          0.5 * d.dot(S.inverse() * d);
    CHECK(std::abs(mixture_log_density(m, x) - closed) <= 1e-10);
  }
}

TEST_CASE("mixture density is finite far from every mode") {
  const auto m = four_mode_mixture();
  CHECK(std::isfinite(mixture_log_density(m, Vector{{200.0, -300.0}})));
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(mixture_log_density(four_mode_mixture(), Vector::Zero(3)), DimensionError);
}

TEST_CASE("mixture covariance validation") {
  CHECK_THROWS(GaussianMixture({0.5, 0.6}, {Vector::Zero(1), Vector::Ones(1)},
                               {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}));
  CHECK_THROWS(GaussianMixture({1.0}, {Vector::Zero(2)}, {Matrix{{1.0, 2.0}, {2.0, 1.0}}}));
}

TEST_CASE("gaussian score") {
  GaussianMixture m({1.0}, {Vector::Zero(2)}, {Matrix::Identity(2, 2)});
  const Vector x{{0.7, -1.3}};
  CHECK((mixture_grad_log_density(m, x) + x).norm() < 1e-14);
}

TEST_CASE("four-mode mixture gradient matches finite differences") {
  const auto m = four_mode_mixture();
  auto f = [&](const Vector& x) { return mixture_log_density(m, x); };
  const Vector at{{3.0, 3.0}};
  CHECK(rel_err(mixture_grad_log_density(m, at), central_difference(f, at)) <= 1e-4);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Vector x{{rng.uniform(-10, 10), rng.uniform(-10, 10)}};
    CHECK(rel_err(mixture_grad_log_density(m, x), central_difference(f, x)) <= 1e-4);
  }
}

TEST_CASE("gradient nearly vanishes at the mean of a well-separated component") {
  GaussianMixture m({0.5, 0.5}, {Vector{{10.0, 0.0}}, Vector{{-10.0, 0.0}}},
                    {Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  auto f = [&](const Vector& x) { return mixture_log_density(m, x); };
  const Vector at{{10.0, 0.0}};
  // Leakage from the other component is 20 exp(-200) here.
  CHECK(mixture_grad_log_density(m, at).norm() < 1e-12);
  CHECK(central_difference(f, at).norm() < 1e-6);
}

TEST_CASE("random mixture construction") {
  const auto m = random_mixture(10, 4, 42);
  CHECK(m.components() == 4);
  double s = 0.0;
  for (double w : m.weights()) {
    CHECK(w > 0.0);
    s += w;
  }
  CHECK(std::abs(s - 1.0) <= 1e-12);
  for (int k = 0; k < 4; ++k) {
    CHECK((m.means()[k].array().abs() < 10.0).all());
    CHECK((m.covariances()[k].diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  const auto again = random_mixture(10, 4, 42);
  for (int k = 0; k < 4; ++k) {
    CHECK(m.means()[k] == again.means()[k]);
    CHECK(m.covariances()[k] == again.covariances()[k]);
  }
  CHECK(m.weights() == again.weights());
  CHECK(random_mixture(3, 1, 5).weights() == std::vector<double>{1.0});
  CHECK_THROWS(random_mixture(0, 2, 1));
}

TEST_CASE("random mixture covariance scale") {
  const auto m = random_mixture(4, 2, 9, 3.0);
  CHECK((m.covariances()[0].diagonal().array() - 3.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("probit posterior at zero") {
  const auto data = simulate_probit_one(2000, 7);
  ProbitModel m(data.X, data.y, Vector::Constant(1, 100.0));
  const double prior0 = -0.5 * std::log(2.0 * std::numbers::pi * 100.0);
  CHECK(probit_log_posterior(m, Vector::Zero(1)) == doctest::Approx(prior0 + 2000 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("probit posterior prefers the generating coefficient") {
  const auto data = simulate_probit_one(2000, 2000);
  ProbitModel m(data.X, data.y, Vector::Constant(1, 100.0));
  CHECK(data.beta_true[0] == doctest::Approx(5.0 / std::sqrt(2.0)));
  CHECK(probit_log_posterior(m, data.beta_true) > probit_log_posterior(m, Vector::Zero(1)));
}

TEST_CASE("probit flip symmetry") {
  const auto data = simulate_probit_eight(200, 3);
  std::vector<int> flipped(data.y.size());
  for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1 - data.y[i];
  ProbitModel a(data.X, data.y, Vector::Constant(1, 100.0));
  ProbitModel b(data.X, flipped, Vector::Constant(1, 100.0));
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Vector beta = 0.3 * rng.normal_vector(8);
    CHECK(probit_log_posterior(b, -beta) == doctest::Approx(probit_log_posterior(a, beta)).epsilon(1e-12));
  }
}

TEST_CASE("probit extreme coefficients stay finite") {
  const auto data = simulate_probit_one(500, 1);
  ProbitModel m(data.X, data.y, Vector::Constant(1, 100.0));
  CHECK(std::isfinite(probit_log_posterior(m, Vector::Constant(1, -60.0))));
  CHECK(std::isfinite(probit_log_posterior(m, Vector::Constant(1, 60.0))));
}

TEST_CASE("probit gradient matches finite differences") {
  const auto data = simulate_probit_eight(300, 4);
  ProbitModel m(data.X, data.y, Vector::Constant(1, 100.0));
  const Target t = m.as_target();
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vector beta = data.beta_true + 0.05 * rng.normal_vector(8);
    CHECK(rel_err(t.grad_log_g(beta), central_difference(t.log_g, beta)) <= 1e-4);
  }
}

TEST_CASE("probit model validation") {
  CHECK_THROWS(ProbitModel(Matrix::Ones(2, 1), {0, 2}, Vector::Constant(1, 1.0)));
  CHECK_THROWS(ProbitModel(Matrix::Ones(2, 1), {0, 1}, Vector::Constant(1, 0.0)));
  CHECK_THROWS(ProbitModel(Matrix::Ones(2, 1), {0}, Vector::Constant(1, 1.0)));
}

TEST_CASE("log normal cdf in both tails") {
  for (double z : {-5.0, -1.0, 0.0, 1.5, 4.0, 7.0})
    CHECK(log_normal_cdf(z) == doctest::Approx(std::log(0.5 * std::erfc(-z / std::sqrt(2.0)))).epsilon(1e-13));
  for (double z : {-25.0, -40.0, -300.0}) {
    const double series = -0.5 * z * z - std::log(-z) - kLogSqrt2Pi +
                          std::log1p(-1.0 / (z * z) + 3.0 / std::pow(z, 4) - 15.0 / std::pow(z, 6) +
                                         105.0 / std::pow(z, 8) - 945.0 / std::pow(z, 10));
    CHECK(log_normal_cdf(z) == doctest::Approx(series).epsilon(1e-12));
  }
  CHECK(log_normal_cdf(40.0) == 0.0);
}

TEST_CASE("LOH posterior is -inf outside the prior box") {
  LohModel m(simulate_loh(40, 1, 0.8, 0.3, 0.7, 9.5));
  CHECK(loh_log_posterior(m, Vector{{31.0, 0.0, 0.0, 0.0}}) == -std::numeric_limits<double>::infinity());
  CHECK(loh_log_posterior(m, Vector{{0.0, 0.0, 0.0, -30.0}}) == -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(loh_log_posterior(m, Vector{{1.0, -1.0, 0.5, 5.0}})));
  CHECK_THROWS(loh_log_posterior(m, Vector{{std::nan(""), 0.0, 0.0, 0.0}}));
}

TEST_CASE("LOH eta -> 1 limit is the binomial likelihood") {
  const auto data = simulate_loh(40, 2, 0.8, 0.3, 0.7, 9.5);
  LohModel m(data);
  for (double lp1 : {-1.2, -0.3, 0.4}) {
    const Vector th{{200.0, lp1, 0.2, 3.0}};
    const double expected = binomial_loglik(data, logistic(lp1));
    CHECK(std::abs(m.log_likelihood(th) - expected) <= 1e-6);
  }
}

TEST_CASE("omega2 at gamma = 0") {
  CHECK(LohModel::omega2(0.0) == 0.25);
}

TEST_CASE("LOH likelihood ignores row order") {
  auto data = simulate_loh(40, 3, 0.8, 0.3, 0.7, 9.5);
  LohModel a(data);
  std::reverse(data.begin(), data.end());
  std::rotate(data.begin(), data.begin() + 13, data.end());
  LohModel b(data);
  const Vector th{{1.0, -0.8, 0.7, 9.0}};
  CHECK(a.log_likelihood(th) == doctest::Approx(b.log_likelihood(th)).epsilon(1e-13));
}

TEST_CASE("LOH data validation") {
  CHECK_THROWS(LohModel({{5, 3}}));
  CHECK_THROWS(LohModel({{-1, 3}}));
}

TEST_CASE("LOH natural parameters") {
  const Vector nat = LohModel::natural_parameters(Vector{{0.0, logit(0.3), logit(0.7), 9.5}});
  CHECK(nat[0] == doctest::Approx(0.5));
  CHECK(nat[1] == doctest::Approx(0.3));
  CHECK(nat[2] == doctest::Approx(0.7));
  CHECK(nat[3] == 9.5);
}

TEST_CASE("log density never NaN on built-in targets") {
  Rng rng(5);
  const Target mix = four_mode_mixture().as_target();
  const auto pd = simulate_probit_one(100, 1);
  const Target probit = ProbitModel(pd.X, pd.y, Vector::Constant(1, 100.0)).as_target();
  const Target loh = LohModel(simulate_loh(40, 4, 0.8, 0.3, 0.7, 9.5)).as_target();
  for (int i = 0; i < 200; ++i) {
    CHECK_FALSE(std::isnan(mix.log_g(Vector{{rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)}})));
    CHECK_FALSE(std::isnan(probit.log_g(Vector::Constant(1, rng.uniform(-1e3, 1e3)))));
    Vector th(4);
    for (int k = 0; k < 4; ++k) th[k] = rng.uniform(-40, 40);
    CHECK_FALSE(std::isnan(loh.log_g(th)));
  }
}

}  // TEST_SUITE
