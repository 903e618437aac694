#pragma once

// Ground-truth simulator of the shared-control loop
//   xdot = A x + B (u_h + u_a),   u_h = Kh Ch x.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "slqr/environment.hpp"
#include "slqr/linalg.hpp"
#include "slqr/segment.hpp"

namespace slqr {

struct LtiPlant {
  Mat A;
  Mat B;

  LtiPlant() = default;
  /// Throws ConfigError unless (A, B) passes the Hautus test on its
  /// non-stable eigenvalues.
  LtiPlant(Mat A, Mat B);

  Index stateDim() const { return A.rows(); }
  Index inputDim() const { return B.cols(); }
};

bool isStabilizable(const Mat& A, const Mat& B);

/// Static output feedback u_h = Kh * (Ch * x).
struct HumanPolicy {
  Mat Kh;  // m x p
  Mat Ch;  // p x n

  Mat effectiveGain() const { return Kh * Ch; }
};

Vec humanInput(const HumanPolicy& human, const Vec& x);

struct CostWeights {
  Mat Q;
  Mat M;
  Mat R;
  double tau = 0.01;

  /// Symmetry, definiteness and tau > 0; throws ConfigError.
  void validate(Index n, Index m) const;
};

struct NudgeConfig {
  std::uint64_t seed = 1;
  /// Fixed amplitude in input units; when empty the amplitude is
  /// `relativeAmplitude` times the RMS of |u| over the last segment.
  std::optional<double> amplitude;
  double relativeAmplitude = 0.1;
  double amplitudeFloor = 1e-3;
  double holdDuration = 0.1;
  /// Reinitialize the state directly instead of driving it with an input.
  bool teleport = false;
};

/// Deterministic source of nudge inputs; entries uniform in [-a, a].
class NudgeGenerator {
 public:
  explicit NudgeGenerator(std::uint64_t seed) : rng_(seed) {}

  Vec draw(Index m, double amplitude);
  double uniform();

 private:
  std::mt19937_64 rng_;
};

struct TrajectorySample {
  double t = 0.0;
  Vec x;
  Vec uh;
  Vec ua;
};

struct TrajectoryLog {
  std::vector<TrajectorySample> samples;
};

struct SegmentOptions {
  int substeps = 100;
  double tStart = 0.0;
};

/// Integrates one reward window of length weights.tau with classical RK4 on
/// the state augmented by every quadrature integral. `human` may be empty
/// (no human in the loop); `ua` is the autonomy gain (m x n).
SegmentRecord simulateSegment(const LtiPlant& plant, const HumanPolicy* human, const Mat& ua,
                              const Vec& x0, const CostWeights& weights,
                              const SegmentOptions& options = {}, TrajectoryLog* log = nullptr);

/// Propagates the loop with u_a = ua * x + bias for `duration`.
Vec simulateHold(const LtiPlant& plant, const HumanPolicy* human, const Mat& ua, const Vec& bias,
                 const Vec& x0, double duration, double step, double tStart = 0.0,
                 TrajectoryLog* log = nullptr);

/// The shared-control loop as seen by a learner.
class SharedLoopSimulator final : public Environment {
 public:
  SharedLoopSimulator(LtiPlant plant, std::optional<HumanPolicy> human, CostWeights weights,
                      NudgeConfig nudge, Vec x0, int substeps = 100);

  Index stateDim() const override { return plant_.stateDim(); }
  Index inputDim() const override { return plant_.inputDim(); }
  SegmentRecord exploit(const Mat& autonomyGain) override;
  void nudge(const Mat& autonomyGain) override;
  double time() const override { return t_; }

  /// Direct reinitialization of the state (test and analysis use).
  void teleport(const Vec& x);
  void setHuman(std::optional<HumanPolicy> human) { human_ = std::move(human); }
  void setLogging(bool on) { logging_ = on; }

  const Vec& state() const { return x_; }
  const TrajectoryLog& trajectory() const { return log_; }
  const std::vector<Vec>& nudgeHistory() const { return nudges_; }
  int segmentCount() const { return segments_; }

 private:
  double nudgeAmplitude() const;

  LtiPlant plant_;
  std::optional<HumanPolicy> human_;
  CostWeights weights_;
  NudgeConfig nudge_;
  NudgeGenerator rng_;
  int substeps_;
  Vec x_;
  double t_ = 0.0;
  double lastRms_ = 0.0;
  int segments_ = 0;
  bool logging_ = true;
  TrajectoryLog log_;
  std::vector<Vec> nudges_;
};

}  // namespace slqr
