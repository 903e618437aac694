#include "slqr/offpolicy.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "slqr/errors.hpp"
#include "slqr/onpolicy.hpp"

namespace slqr {

ReplayBuffer::ReplayBuffer(Index n, Index m, double tau, int substeps)
    : n_(n), m_(m), tau_(tau), substeps_(substeps) {
  if (n < 1 || m < 1) throw DimensionError("ReplayBuffer: dimensions must be >= 1");
}

void ReplayBuffer::append(SegmentRecord seg) {
  const Index N = triangularSize(n_);
  if (seg.xStart.size() != n_ || seg.xEnd.size() != n_ || seg.moments.size() != N ||
      seg.deltaUh.size() != N || seg.deltaUa.size() != N || seg.deltaBasis.rows() != m_ * n_ ||
      seg.deltaBasis.cols() != N) {
    throw DimensionError("ReplayBuffer: segment does not match the buffer dimensions");
  }
  segments_.push_back(std::move(seg));
}

ReplayBuffer collectOffPolicyData(Environment& env, int count, const Mat& behaviorGain,
                                  double tau, int substeps) {
  ReplayBuffer buffer(env.stateDim(), env.inputDim(), tau, substeps);
  const Mat F = behaviorGain.size() == 0 ? Mat::Zero(env.inputDim(), env.stateDim()) : behaviorGain;
  for (int k = 0; k < count; ++k) {
    buffer.append(env.exploit(F));
    env.nudge(F);
  }
  return buffer;
}

OffPolicyRow recomputeRow(const SegmentRecord& seg, const TargetPolicy& target,
                          const LearnerKnowledge& knowledge, OffPolicyTarget mode) {
  OffPolicyRow out;
  out.phiDiff = seg.phiDifference();
  if (!target.gain) {
    if (mode != OffPolicyTarget::Takeover)
      throw ConfigError("the human-signal target policy only applies to takeover learning");
    // u_0 = u_h: Delta(u_h + u_a, u_h) = u_a is measured directly.
    out.deltaK = seg.deltaUa;
    out.rhs = -(seg.rX + seg.rUhR);
    return out;
  }
  const Mat& K = *target.gain;
  requireShape(K, knowledge.inputDim(), seg.stateDim(), "recomputeRow: target gain");
  const Vec deltaBehavior =
      mode == OffPolicyTarget::Takeover ? Vec(seg.deltaUh + seg.deltaUa) : seg.deltaUa;
  out.deltaK = deltaBehavior - seg.deltaForGain(K);
  const double humanEffort = mode == OffPolicyTarget::MinimumIntervention ? seg.rUh : 0.0;
  out.rhs = -(seg.rX + humanEffort + seg.quadraticIntegral(K.transpose() * knowledge.R * K));
  return out;
}

RegressionSystem recomputeRows(const ReplayBuffer& buffer, const TargetPolicy& target,
                               const LearnerKnowledge& knowledge, OffPolicyTarget mode) {
  RegressionSystem sys(buffer.stateDim());
  for (const auto& seg : buffer.segments()) {
    const OffPolicyRow row = recomputeRow(seg, target, knowledge, mode);
    sys.addRow(row.row(), row.rhs);
  }
  return sys;
}

namespace {

Index targetRows(Index N, double oversampling) {
  const auto wanted = static_cast<Index>(std::ceil(static_cast<double>(N) * oversampling - 1e-12));
  return std::max(N, wanted);
}

TargetPolicy initialTarget(OffPolicyTarget mode, Index m, Index n) {
  if (mode == OffPolicyTarget::Takeover) return TargetPolicy::humanSignal();
  return TargetPolicy::matrix(Mat::Zero(m, n));
}

// Returns the number of segments appended; zero means no data source.
using TopUp = std::function<int(ReplayBuffer&, int)>;

ConvergenceReport iterateOnBuffer(ReplayBuffer& buffer, const LearnerKnowledge& knowledge,
                                  const OffPolicyOptions& options, const std::optional<Mat>& oracleP,
                                  int initialFresh, const TopUp& topUp) {
  const Index n = buffer.stateDim();
  const Index m = buffer.inputDim();
  const Index N = triangularSize(n);
  requireShape(knowledge.B, n, m, "off-policy: B");
  const WeightSolveOptions solveOpts{options.kappaMax, 1e-6};

  ConvergenceReport report;
  report.totalSegments = initialFresh;
  TargetPolicy target = initialTarget(options.mode, m, n);
  // The takeover run starts from a signal, not a matrix; K[0] is reported as
  // zero-sized in that case.
  report.K.push_back(target.gain ? *target.gain : Mat());

  for (int it = 0; it < options.stop.maxIterations; ++it) {
    int fresh = it == 0 ? initialFresh : 0;
    RegressionSystem sys = recomputeRows(buffer, target, knowledge, options.mode);
    if (sys.conditionNumber() > options.kappaMax || sys.rows() < N) {
      // Short on rows: fill up to N. Enough rows but ill-conditioned: N more.
      const int needed = static_cast<int>(sys.rows() < N ? N - sys.rows() : N);
      const int added = topUp ? topUp(buffer, needed) : 0;
      fresh += added;
      report.totalSegments += added;
      if (added > 0) sys = recomputeRows(buffer, target, knowledge, options.mode);
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
    report.iterations.push_back(rec);
    report.P.push_back(P);

    const Mat K = policyImprove(P, knowledge.B, knowledge.R);
    report.K.push_back(K);
    target = TargetPolicy::matrix(K);

    if (it > 0 && rec.deltaP <= options.stop.relTol * std::max(P.norm(), 1e-300)) {
      report.converged = true;
      break;
    }
  }
  return report;
}

}  // namespace

ConvergenceReport runOffPolicy(Environment& env, const LearnerKnowledge& knowledge,
                               const OffPolicyOptions& options, const std::optional<Mat>& oracleP,
                               ReplayBuffer* bufferOut) {
  const Index n = env.stateDim();
  const Index m = env.inputDim();
  const Index N = triangularSize(n);
  const Mat F = options.behaviorGain.size() == 0 ? Mat::Zero(m, n) : options.behaviorGain;
  requireShape(F, m, n, "runOffPolicy: behavior gain");

  // Collection: keep exploring until the first regression is usable.
  ReplayBuffer buffer(n, m, knowledge.tau, options.substeps);
  const Index rowsWanted = targetRows(N, options.oversampling);
  const TargetPolicy first = initialTarget(options.mode, m, n);
  RegressionSystem sys(n);
  int collected = 0;
  while (sys.rows() < rowsWanted || sys.conditionNumber() > options.kappaMax) {
    if (collected >= options.maxInitialSegments) {
      std::ostringstream os;
      os << "off-policy collection stayed collinear after " << collected << " segments (rank "
         << sys.numericalRank() << " of " << N << ", cond " << sys.conditionNumber() << ")";
      throw CollinearityError(os.str(), sys.numericalRank(), N, sys.conditionNumber());
    }
    SegmentRecord seg = env.exploit(F);
    const OffPolicyRow row = recomputeRow(seg, first, knowledge, options.mode);
    sys.addRow(row.row(), row.rhs);
    buffer.append(std::move(seg));
    env.nudge(F);
    ++collected;
  }

  const TopUp topUp = [&](ReplayBuffer& buf, int needed) {
    for (int k = 0; k < needed; ++k) {
      buf.append(env.exploit(F));
      env.nudge(F);
    }
    return needed;
  };
  ConvergenceReport report = iterateOnBuffer(buffer, knowledge, options, oracleP, collected, topUp);
  if (bufferOut) *bufferOut = buffer;
  return report;
}

ConvergenceReport runOffPolicyOnBuffer(const ReplayBuffer& buffer, const LearnerKnowledge& knowledge,
                                       const OffPolicyOptions& options,
                                       const std::optional<Mat>& oracleP) {
  ReplayBuffer copy = buffer;
  return iterateOnBuffer(copy, knowledge, options, oracleP, 0, TopUp{});
}

}  // namespace slqr
