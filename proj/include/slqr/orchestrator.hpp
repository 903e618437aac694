#pragma once

// Wires the simulated human loop, the learners and the model-based oracles
// into the three experiment types.

#include <optional>
#include <string>
#include <vector>

#include "slqr/offpolicy.hpp"
#include "slqr/onpolicy.hpp"
#include "slqr/report.hpp"
#include "slqr/simulation.hpp"

namespace slqr {

enum class LearningMode {
  OnPolicyMinIntervention,
  OffPolicyMinIntervention,
  OffPolicyTakeover,
};

std::string toString(LearningMode mode);
LearningMode learningModeFromString(const std::string& name);

struct LearnerSettings {
  StopCriteria stop;
  double kappaMax = 1e8;
  double oversampling = 1.0;
  int segmentsPerTrajectory = 1;
  int substeps = 100;
  int maxSegmentsPerIteration = 120;
};

struct SharedScenario {
  LtiPlant plant;
  HumanPolicy human;
  CostWeights weights;
  NudgeConfig nudge;
  LearningMode mode = LearningMode::OnPolicyMinIntervention;
  Vec x0;
  LearnerSettings learner;

  /// Dimensions, weights, and A + B Kh Ch Hurwitz. Throws ConfigError.
  void validate() const;

  /// The subset of the scenario a learner may see.
  LearnerKnowledge knowledge() const;
};

/// The car-following error dynamics with unit masses and drag, the human's
/// effective gain [0, 1, -1], Q = 5 I, M = 1, R = 10, tau = 0.01.
SharedScenario carFollowingScenario(LearningMode mode = LearningMode::OnPolicyMinIntervention,
                                    std::uint64_t seed = 7);

/// An algebraic Riccati target solved model-based.
struct AreTarget {
  Mat Aeff;
  Mat B;
  Mat Qeff;
  Mat R;
  Mat Pstar;
  Mat Kstar;
  double residual = 0.0;
};

/// A_h = A + B Kh Ch with Q_h = Q + (Kh Ch)^T M (Kh Ch), from K0 = 0.
AreTarget buildMinInterventionTarget(const SharedScenario& scenario);

/// Plain (A, B, Q, R). The oracle's initial gain is the human's effective
/// gain when it stabilizes A, otherwise zero when A is Hurwitz, otherwise a
/// Bass-style stabilizing gain.
AreTarget buildTakeoverTarget(const SharedScenario& scenario);

/// Target matching the scenario's mode.
AreTarget buildTarget(const SharedScenario& scenario);

/// Stabilizing gain for a stabilizable pair via the Bass construction.
Mat bassStabilizingGain(const Mat& A, const Mat& B);

struct ExperimentReport {
  LearningMode mode = LearningMode::OnPolicyMinIntervention;
  ConvergenceReport learning;
  AreTarget oracle;
  Mat learnedP;
  Mat learnedK;
  double relativeError = 0.0;
  Eigen::VectorXcd closedLoopEigenvalues;
  double spectralAbscissa = 0.0;
  TrajectoryLog trajectory;
  std::optional<ReplayBuffer> buffer;
  std::vector<Vec> nudges;
};

/// Runs the learner that matches `scenario.mode` on a fresh simulator.
ExperimentReport runScenario(const SharedScenario& scenario);

/// Minimum-intervention and takeover learners replayed in parallel over one
/// shared off-policy buffer.
struct ParallelOffPolicyReport {
  ReplayBuffer buffer;
  ExperimentReport minIntervention;
  ExperimentReport takeover;
};
ParallelOffPolicyReport runParallelOffPolicy(const SharedScenario& scenario);

struct PostExitReport {
  double horizon = 0.0;
  double finalStateRatio = 0.0;  // ||x(T)|| / ||x0||
  double realizedCost = 0.0;
  double predictedCost = 0.0;    // x0^T P x0
  double relativeCostError = 0.0;
  bool stable = false;
  bool passed = false;
};

/// Simulates the plant with the human removed (u_h = 0) and u_a = Klearned x.
PostExitReport verifyTakeoverAfterExit(const SharedScenario& scenario, const Mat& Klearned,
                                       const Mat& Plearned);

/// Largest relative violation of the integral value equation by P over
/// on-policy segments of gain K (min-intervention reward).
double valueEquationResidual(const Mat& P, const Mat& K, const std::vector<SegmentRecord>& segments,
                             const LearnerKnowledge& knowledge);

/// Residual monitor used to trigger relearning after the loop changes.
struct ResidualMonitor {
  double threshold = 1e-7;
  bool relearningRequired(const Mat& P, const Mat& K, const std::vector<SegmentRecord>& fresh,
                          const LearnerKnowledge& knowledge) const {
    return valueEquationResidual(P, K, fresh, knowledge) > threshold;
  }
};

}  // namespace slqr
