#pragma once

#include <vector>

#include "slqr/linalg.hpp"

namespace slqr {

/// Stacked linear system A w = b over quadratic-form weights.
class RegressionSystem {
 public:
  explicit RegressionSystem(Index n);

  /// Appends one row; the condition number is refreshed.
  void addRow(const Vec& row, double rhs);

  Index stateDim() const { return n_; }
  Index rows() const { return static_cast<Index>(rhs_.size()); }
  /// N = n(n+1)/2, the number of unknowns.
  Index minRows() const { return triangularSize(n_); }

  Mat matrix() const;
  Vec rhs() const;
  double conditionNumber() const { return cond_; }
  Index numericalRank() const;

 private:
  Index n_;
  std::vector<Vec> rows_;
  std::vector<double> rhs_;
  double cond_;
};

struct WeightSolveOptions {
  double kappaMax = 1e8;
  /// Allowed ||A w - b|| relative to ||b||.
  double consistencyTol = 1e-6;
};

/// Least-squares weights. Throws CollinearityError when the system has fewer
/// than N rows, is rank deficient, or its condition number exceeds kappaMax;
/// throws InconsistentSystemError when the residual check fails.
WeightVector solveWeights(const RegressionSystem& sys, const WeightSolveOptions& options = {});

}  // namespace slqr
