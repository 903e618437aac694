#pragma once

// Off-policy integral policy iteration with experience replay. A fixed
// behavior loop generates the data once; every target-dependent term of a
// regression row is rebuilt from gain-independent integrals.

#include <optional>
#include <vector>

#include "slqr/environment.hpp"
#include "slqr/regression.hpp"
#include "slqr/report.hpp"
#include "slqr/segment.hpp"

namespace slqr {

/// What the target policy optimizes.
enum class OffPolicyTarget {
  /// Virtual system (A + B Kh Ch, B); behavior input u_a; reward includes
  /// the human-effort term.
  MinimumIntervention,
  /// Virtual system (A, B); behavior input u_h + u_a; reward excludes the
  /// human-effort term; u_0 is the measured human signal.
  Takeover,
};

class ReplayBuffer {
 public:
  ReplayBuffer(Index n, Index m, double tau, int substeps);

  Index stateDim() const { return n_; }
  Index inputDim() const { return m_; }
  double tau() const { return tau_; }
  int substeps() const { return substeps_; }
  const std::vector<SegmentRecord>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }

  /// Segments can only be appended; stored integrals are never modified.
  void append(SegmentRecord seg);

 private:
  Index n_;
  Index m_;
  double tau_;
  int substeps_;
  std::vector<SegmentRecord> segments_;
};

struct OffPolicyRow {
  Vec phiDiff;
  Vec deltaK;
  double rhs = 0.0;

  Vec row() const { return phiDiff - deltaK; }
};

/// Target gain of one iteration. Empty `gain` stands for the measured human
/// signal (the first takeover iteration).
struct TargetPolicy {
  std::optional<Mat> gain;

  static TargetPolicy humanSignal() { return {}; }
  static TargetPolicy matrix(Mat K) { return {std::move(K)}; }
};

/// Runs `count` reward windows with a fixed behavior autonomy gain,
/// nudging between them.
ReplayBuffer collectOffPolicyData(Environment& env, int count, const Mat& behaviorGain,
                                  double tau, int substeps);

/// One regression row for the given target policy.
OffPolicyRow recomputeRow(const SegmentRecord& seg, const TargetPolicy& target,
                          const LearnerKnowledge& knowledge, OffPolicyTarget mode);

/// Rebuilds the regression over the whole buffer for a target policy.
RegressionSystem recomputeRows(const ReplayBuffer& buffer, const TargetPolicy& target,
                               const LearnerKnowledge& knowledge, OffPolicyTarget mode);

struct OffPolicyOptions {
  OffPolicyTarget mode = OffPolicyTarget::MinimumIntervention;
  StopCriteria stop;
  double kappaMax = 1e8;
  double oversampling = 1.0;
  /// Behavior autonomy gain during collection; empty means zero.
  Mat behaviorGain;
  int substeps = 100;
  /// Bound on segments gathered for the initial buffer.
  int maxInitialSegments = 120;
};

/// Algorithm-2 style loop on a live environment: one collection phase, then
/// replayed iterations. When a recomputed system is badly conditioned,
/// min(N, needed) segments are appended once before giving up.
ConvergenceReport runOffPolicy(Environment& env, const LearnerKnowledge& knowledge,
                               const OffPolicyOptions& options,
                               const std::optional<Mat>& oracleP = std::nullopt,
                               ReplayBuffer* bufferOut = nullptr);

/// Replays a fixed buffer; never collects new data.
ConvergenceReport runOffPolicyOnBuffer(const ReplayBuffer& buffer, const LearnerKnowledge& knowledge,
                                       const OffPolicyOptions& options,
                                       const std::optional<Mat>& oracleP = std::nullopt);

}  // namespace slqr
