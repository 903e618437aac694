#pragma once

#include <stdexcept>
#include <string>

namespace slqr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or indices that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear solve, exponential, or iteration failed numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A gain (or closed loop) that was required to be stabilizing is not.
class NotStabilizingError : public Error {
 public:
  using Error::Error;
};

/// A linear equation has no solution (right-hand side outside the image).
class InconsistentSystemError : public Error {
 public:
  using Error::Error;
};

/// The regression data is collinear: the stacked matrix is rank deficient
/// or too badly conditioned to trust.
class CollinearityError : public Error {
 public:
  CollinearityError(const std::string& what, long numerical_rank, long expected_rank,
                    double condition_number)
      : Error(what),
        numerical_rank_(numerical_rank),
        expected_rank_(expected_rank),
        condition_number_(condition_number) {}

  long numericalRank() const { return numerical_rank_; }
  long expectedRank() const { return expected_rank_; }
  double conditionNumber() const { return condition_number_; }

 private:
  long numerical_rank_;
  long expected_rank_;
  double condition_number_;
};

/// The simulated state left the finite range.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// A scenario or configuration file is malformed or violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace slqr
