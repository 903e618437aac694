#pragma once

// The learner-side view of the shared-control loop. Learners see measured
// segments, the input matrix and the designer's cost weights; the plant's
// internal dynamics and the human's gains stay behind this interface.

#include "slqr/segment.hpp"

namespace slqr {

/// Prior knowledge the autonomy system is allowed to use.
struct LearnerKnowledge {
  Mat B;
  Mat Q;
  Mat M;
  Mat R;
  double tau = 0.0;

  Index stateDim() const { return B.rows(); }
  Index inputDim() const { return B.cols(); }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual Index stateDim() const = 0;
  virtual Index inputDim() const = 0;

  /// Runs one reward window with u_a = autonomyGain * x and returns its
  /// measurements.
  virtual SegmentRecord exploit(const Mat& autonomyGain) = 0;

  /// Moves the loop onto a new trajectory: u_a = autonomyGain * x plus a
  /// pseudorandom constant, held for the configured duration.
  virtual void nudge(const Mat& autonomyGain) = 0;

  virtual double time() const = 0;
};

}  // namespace slqr
