#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace certsdp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented precondition (indefinite where PSD was
/// required, parameter out of range, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An iterative subroutine failed in a way the caller cannot recover from.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

inline constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2;

}  // namespace certsdp
