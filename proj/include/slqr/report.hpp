#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "slqr/linalg.hpp"

namespace slqr {

struct IterationRecord {
  int iteration = 0;
  /// ||P_i - P_{i-1}||_F, NaN on the first iteration.
  double deltaP = std::numeric_limits<double>::quiet_NaN();
  /// ||P_i - P*||_F, NaN when no oracle was supplied.
  double errorToOracle = std::numeric_limits<double>::quiet_NaN();
  double conditionNumber = 0.0;
  Index rank = 0;
  /// Rows in the regression that produced P_i.
  int segmentsUsed = 0;
  /// Segments newly simulated during this iteration.
  int freshSegments = 0;
};

struct ConvergenceReport {
  std::vector<Mat> P;
  std::vector<Mat> K;  // K[0] is the initial gain; K[i+1] = -R^-1 B^T P[i]
  std::vector<IterationRecord> iterations;
  bool converged = false;
  int totalSegments = 0;

  const Mat& finalP() const { return P.back(); }
  const Mat& finalK() const { return K.back(); }
};

/// Shared stopping rule of the learners.
struct StopCriteria {
  double relTol = 1e-6;
  int maxIterations = 50;
};

}  // namespace slqr
