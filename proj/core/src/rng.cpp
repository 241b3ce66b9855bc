#include "pmcmc/rng.hpp"

#include <cmath>

namespace pmcmc {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain, std::uint64_t index) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(domain));
  return mix64(h ^ mix64(index));
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() {
  // 53 random bits, shifted by half an ulp so neither 0 nor 1 is produced.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_(engine_); }

Vector Rng::normal_vector(Eigen::Index n) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
  return z;
}

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

double Rng::chi_squared(double dof) {
  std::gamma_distribution<double> gamma(0.5 * dof, 2.0);
  return gamma(engine_);
}

std::int64_t Rng::poisson(double mean) {
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine_);
}

std::uint64_t Rng::below(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace pmcmc
