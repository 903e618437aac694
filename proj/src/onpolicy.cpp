#include "slqr/onpolicy.hpp"

#include <cmath>
#include <sstream>

#include "slqr/errors.hpp"

namespace slqr {

double targetControlCost(const SegmentRecord& seg, const Mat& Ki, const Mat& R) {
  requireShape(Ki, R.rows(), seg.stateDim(), "targetControlCost: Ki");
  return seg.quadraticIntegral(Ki.transpose() * R * Ki);
}

OnPolicyRow assembleOnPolicyRow(const SegmentRecord& seg, const Mat& Ki, const Mat& R,
                                RewardTerms terms) {
  if (seg.xEnd.size() != seg.xStart.size() || seg.moments.size() != triangularSize(seg.stateDim()))
    throw DimensionError("assembleOnPolicyRow: malformed segment");
  OnPolicyRow out;
  out.row = seg.phiDifference();
  const double reward = seg.rX + (terms.humanEffort ? seg.rUh : 0.0) + targetControlCost(seg, Ki, R);
  out.rhs = -reward;
  return out;
}

Mat policyImprove(const Mat& P, const Mat& B, const Mat& R) {
  requireShape(P, B.rows(), B.rows(), "policyImprove: P");
  requireShape(R, B.cols(), B.cols(), "policyImprove: R");
  Eigen::FullPivLU<Mat> lu(R);
  if (!lu.isInvertible()) throw NumericalError("policyImprove: R is singular");
  return -lu.solve(B.transpose() * P);
}

ConvergenceReport runOnPolicy(Environment& env, const LearnerKnowledge& knowledge,
                              const OnPolicyOptions& options, const std::optional<Mat>& oracleP) {
  const Index n = env.stateDim();
  const Index m = env.inputDim();
  requireShape(knowledge.B, n, m, "runOnPolicy: B");
  Mat K = options.K0.size() == 0 ? Mat::Zero(m, n) : options.K0;
  requireShape(K, m, n, "runOnPolicy: K0");

  const Index N = triangularSize(n);
  const auto wanted = static_cast<Index>(std::ceil(static_cast<double>(N) * options.oversampling - 1e-12));
  const Index target = std::max(N, wanted);
  const WeightSolveOptions solveOpts{options.kappaMax, 1e-6};

  ConvergenceReport report;
  report.K.push_back(K);
  for (int it = 0; it < options.stop.maxIterations; ++it) {
    RegressionSystem sys(n);
    int fresh = 0;
    while (sys.rows() < target || sys.conditionNumber() > options.kappaMax) {
      if (fresh >= options.maxSegmentsPerIteration) {
        std::ostringstream os;
        os << "iteration " << it << ": data stayed collinear after " << fresh
           << " segments (rank " << sys.numericalRank() << " of " << N << ", cond "
           << sys.conditionNumber() << ")";
        throw CollinearityError(os.str(), sys.numericalRank(), N, sys.conditionNumber());
      }
      for (int s = 0; s < options.segmentsPerTrajectory; ++s) {
        const SegmentRecord seg = env.exploit(K);
        const OnPolicyRow row = assembleOnPolicyRow(seg, K, knowledge.R, options.reward);
        sys.addRow(row.row, row.rhs);
        ++fresh;
      }
      env.nudge(K);
    }

    const WeightVector W = solveWeights(sys, solveOpts);
    const Mat P = matrixFromWeights(W);

    IterationRecord rec;
    rec.iteration = it;
    rec.conditionNumber = sys.conditionNumber();
    rec.rank = sys.numericalRank();
    rec.segmentsUsed = static_cast<int>(sys.rows());
    rec.freshSegments = fresh;
    if (!report.P.empty()) rec.deltaP = (P - report.P.back()).norm();
    if (oracleP) rec.errorToOracle = (P - *oracleP).norm();
    report.totalSegments += fresh;
    report.iterations.push_back(rec);
    report.P.push_back(P);

    K = policyImprove(P, knowledge.B, knowledge.R);
    report.K.push_back(K);

    if (it > 0 && rec.deltaP <= options.stop.relTol * std::max(P.norm(), 1e-300)) {
      report.converged = true;
      break;
    }
  }
  return report;
}

}  // namespace slqr
