#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pmcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, Eigen::Index expected, Eigen::Index got)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

inline void check_dim(const char* what, Eigen::Index expected, Eigen::Index got) {
  if (expected != got) throw DimensionError(what, expected, got);
}

}  // namespace pmcmc
