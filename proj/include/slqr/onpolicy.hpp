#pragma once

// On-policy integral policy iteration. Each iteration drives the loop with
// the current target gain, stacks phi(x_end) - phi(x_start) against the
// measured reward, solves for the value weights and improves the gain.

#include <optional>

#include "slqr/environment.hpp"
#include "slqr/regression.hpp"
#include "slqr/report.hpp"
#include "slqr/segment.hpp"

namespace slqr {

struct OnPolicyRow {
  Vec row;
  double rhs = 0.0;
};

/// Which measured rewards enter the on-policy right-hand side.
struct RewardTerms {
  /// Add int u_h^T M u_h (minimum-intervention cost).
  bool humanEffort = true;
};

/// int u_i^T R u_i dt reconstructed from the moments: sum [K^T R K](p,q) int x_p x_q.
double targetControlCost(const SegmentRecord& seg, const Mat& Ki, const Mat& R);

/// row = phi(xEnd) - phi(xStart), rhs = -(rX [+ rUh] + rUi).
OnPolicyRow assembleOnPolicyRow(const SegmentRecord& seg, const Mat& Ki, const Mat& R,
                                RewardTerms terms = {});

/// K = -R^-1 B^T P. Throws NumericalError for a singular R.
Mat policyImprove(const Mat& P, const Mat& B, const Mat& R);

struct OnPolicyOptions {
  /// Initial target gain; empty means zero.
  Mat K0;
  StopCriteria stop;
  double kappaMax = 1e8;
  /// Rows per regression = ceil(N * oversampling).
  double oversampling = 1.0;
  int segmentsPerTrajectory = 1;
  /// Bound on segments gathered for one regression before giving up.
  int maxSegmentsPerIteration = 120;
  RewardTerms reward;
};

/// Algorithm-1 style learning loop. `oracleP` only feeds the report.
ConvergenceReport runOnPolicy(Environment& env, const LearnerKnowledge& knowledge,
                              const OnPolicyOptions& options,
                              const std::optional<Mat>& oracleP = std::nullopt);

}  // namespace slqr
