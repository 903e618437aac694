#include "slqr/orchestrator.hpp"

#include <cmath>
#include <future>

#include "slqr/errors.hpp"

namespace slqr {

std::string toString(LearningMode mode) {
  switch (mode) {
    case LearningMode::OnPolicyMinIntervention: return "onpolicy";
    case LearningMode::OffPolicyMinIntervention: return "offpolicy";
    case LearningMode::OffPolicyTakeover: return "takeover";
  }
  return "unknown";
}

LearningMode learningModeFromString(const std::string& name) {
  if (name == "onpolicy" || name == "OnPolicyMinIntervention") return LearningMode::OnPolicyMinIntervention;
  if (name == "offpolicy" || name == "OffPolicyMinIntervention") return LearningMode::OffPolicyMinIntervention;
  if (name == "takeover" || name == "OffPolicyTakeover") return LearningMode::OffPolicyTakeover;
  throw ConfigError("unknown learning mode '" + name + "'");
}

void SharedScenario::validate() const {
  const Index n = plant.stateDim();
  const Index m = plant.inputDim();
  if (human.Ch.cols() != n || human.Kh.rows() != m || human.Kh.cols() != human.Ch.rows())
    throw ConfigError("scenario: human gains do not match the plant (Kh m x p, Ch p x n)");
  weights.validate(n, m);
  if (x0.size() != n) throw ConfigError("scenario: x0 has the wrong length");
  if (!isHurwitz(plant.A + plant.B * human.effectiveGain()))
    throw ConfigError("scenario: the human loop A + B Kh Ch is not Hurwitz");
  if (learner.substeps < 10) throw ConfigError("scenario: substeps must be >= 10");
  if (!(learner.oversampling >= 1.0)) throw ConfigError("scenario: oversampling must be >= 1");
  if (learner.segmentsPerTrajectory < 1) throw ConfigError("scenario: segmentsPerTrajectory must be >= 1");
}

LearnerKnowledge SharedScenario::knowledge() const {
  return {plant.B, weights.Q, weights.M, weights.R, weights.tau};
}

SharedScenario carFollowingScenario(LearningMode mode, std::uint64_t seed) {
  // x1: lead speed error, x2: spacing error, x3: follower speed error.
  Mat A(3, 3);
  A << -1, 0, 0,
        1, 0, -1,
        0, 0, -1;
  Mat B(3, 1);
  B << 0, 0, 1;
  // The human cannot see the lead vehicle's speed error.
  Mat Ch(2, 3);
  Ch << 0, 1, 0,
        0, 0, 1;
  Mat Kh(1, 2);
  Kh << 1, -1;

  SharedScenario s;
  s.plant = LtiPlant(A, B);
  s.human = HumanPolicy{Kh, Ch};
  s.weights = CostWeights{5.0 * Mat::Identity(3, 3), Mat::Identity(1, 1), 10.0 * Mat::Identity(1, 1), 0.01};
  s.nudge.seed = seed;
  s.mode = mode;
  s.x0 = Vec(3);
  s.x0 << 1.0, 2.0, -1.0;
  return s;
}

namespace {

Mat bassOnControllable(const Mat& A, const Mat& B) {
  const Index n = A.rows();
  const double beta = A.norm() + 1.0;
  const Mat shifted = -(A + beta * Mat::Identity(n, n));
  const Mat Y = solveLyapunov(shifted.transpose(), 2.0 * B * B.transpose());
  Eigen::FullPivLU<Mat> lu(Y);
  if (!lu.isInvertible()) throw NotStabilizingError("no stabilizing initialization found (pair not controllable)");
  return -B.transpose() * lu.inverse();
}

}  // namespace

Mat bassStabilizingGain(const Mat& A, const Mat& B) {
  const Index n = A.rows();
  // Kalman decomposition: Bass on the controllable subspace, no feedback on
  // the rest (stable when the pair is stabilizable).
  Mat ctrb(n, n * B.cols());
  Mat block = B;
  for (Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * B.cols(), B.cols()) = block;
    block = A * block;
  }
  Eigen::JacobiSVD<Mat> svd(ctrb, Eigen::ComputeFullU);
  const Index r = numericalRank(ctrb);
  if (r == 0) {
    if (!isHurwitz(A)) throw NotStabilizingError("no stabilizing initialization found");
    return Mat::Zero(B.cols(), n);
  }
  const Mat T = svd.matrixU();
  const Mat Abar = T.transpose() * A * T;
  const Mat Bbar = T.transpose() * B;
  Mat Kbar = Mat::Zero(B.cols(), n);
  Kbar.leftCols(r) = bassOnControllable(Abar.topLeftCorner(r, r), Bbar.topRows(r));
  const Mat K = Kbar * T.transpose();
  if (!isHurwitz(A + B * K)) throw NotStabilizingError("no stabilizing initialization found (pair not stabilizable)");
  return K;
}

AreTarget buildMinInterventionTarget(const SharedScenario& scenario) {
  const Mat& A = scenario.plant.A;
  const Mat& B = scenario.plant.B;
  const Mat Keff = scenario.human.effectiveGain();
  AreTarget t;
  t.Aeff = A + B * Keff;
  if (!isHurwitz(t.Aeff)) throw ConfigError("minimum-intervention target: A + B Kh Ch is not Hurwitz");
  t.B = B;
  t.Qeff = scenario.weights.Q + Keff.transpose() * scenario.weights.M * Keff;
  t.R = scenario.weights.R;
  const CareSolution care =
      kleinmanCare(t.Aeff, B, t.Qeff, t.R, Mat::Zero(B.cols(), A.rows()));
  t.Pstar = care.P;
  t.Kstar = care.K;
  t.residual = care.residual;
  return t;
}

AreTarget buildTakeoverTarget(const SharedScenario& scenario) {
  const Mat& A = scenario.plant.A;
  const Mat& B = scenario.plant.B;
  Mat K0 = scenario.human.effectiveGain();
  if (!isHurwitz(A + B * K0)) K0 = isHurwitz(A) ? Mat::Zero(B.cols(), A.rows()) : bassStabilizingGain(A, B);
  AreTarget t;
  t.Aeff = A;
  t.B = B;
  t.Qeff = scenario.weights.Q;
  t.R = scenario.weights.R;
  const CareSolution care = kleinmanCare(A, B, t.Qeff, t.R, K0);
  t.Pstar = care.P;
  t.Kstar = care.K;
  t.residual = care.residual;
  return t;
}

AreTarget buildTarget(const SharedScenario& scenario) {
  return scenario.mode == LearningMode::OffPolicyTakeover ? buildTakeoverTarget(scenario)
                                                          : buildMinInterventionTarget(scenario);
}

namespace {

OffPolicyOptions offPolicyOptions(const SharedScenario& s, OffPolicyTarget target) {
  OffPolicyOptions o;
  o.mode = target;
  o.stop = s.learner.stop;
  o.kappaMax = s.learner.kappaMax;
  o.oversampling = s.learner.oversampling;
  o.substeps = s.learner.substeps;
  o.maxInitialSegments = s.learner.maxSegmentsPerIteration;
  return o;
}

void finalize(ExperimentReport& r) {
  r.learnedP = r.learning.finalP();
  r.learnedK = r.learning.finalK();
  r.relativeError = (r.learnedP - r.oracle.Pstar).norm() / r.oracle.Pstar.norm();
  r.closedLoopEigenvalues = eigenvalues(r.oracle.Aeff + r.oracle.B * r.learnedK);
  r.spectralAbscissa = r.closedLoopEigenvalues.real().maxCoeff();
}

}  // namespace

ExperimentReport runScenario(const SharedScenario& scenario) {
  scenario.validate();
  ExperimentReport report;
  report.mode = scenario.mode;
  report.oracle = buildTarget(scenario);

  SharedLoopSimulator sim(scenario.plant, scenario.human, scenario.weights, scenario.nudge,
                          scenario.x0, scenario.learner.substeps);
  const LearnerKnowledge knowledge = scenario.knowledge();

  switch (scenario.mode) {
    case LearningMode::OnPolicyMinIntervention: {
      OnPolicyOptions o;
      o.stop = scenario.learner.stop;
      o.kappaMax = scenario.learner.kappaMax;
      o.oversampling = scenario.learner.oversampling;
      o.segmentsPerTrajectory = scenario.learner.segmentsPerTrajectory;
      o.maxSegmentsPerIteration = scenario.learner.maxSegmentsPerIteration;
      o.reward.humanEffort = true;
      report.learning = runOnPolicy(sim, knowledge, o, report.oracle.Pstar);
      break;
    }
    case LearningMode::OffPolicyMinIntervention:
    case LearningMode::OffPolicyTakeover: {
      const auto target = scenario.mode == LearningMode::OffPolicyTakeover
                              ? OffPolicyTarget::Takeover
                              : OffPolicyTarget::MinimumIntervention;
      ReplayBuffer buffer(scenario.plant.stateDim(), scenario.plant.inputDim(), scenario.weights.tau,
                          scenario.learner.substeps);
      report.learning = runOffPolicy(sim, knowledge, offPolicyOptions(scenario, target),
                                     report.oracle.Pstar, &buffer);
      report.buffer = std::move(buffer);
      break;
    }
  }
  finalize(report);
  report.trajectory = sim.trajectory();
  report.nudges = sim.nudgeHistory();
  return report;
}

ParallelOffPolicyReport runParallelOffPolicy(const SharedScenario& scenario) {
  scenario.validate();
  const LearnerKnowledge knowledge = scenario.knowledge();
  const Index n = scenario.plant.stateDim();
  const Index m = scenario.plant.inputDim();
  const Index N = triangularSize(n);

  SharedLoopSimulator sim(scenario.plant, scenario.human, scenario.weights, scenario.nudge,
                          scenario.x0, scenario.learner.substeps);
  ReplayBuffer buffer(n, m, scenario.weights.tau, scenario.learner.substeps);
  const Mat zero = Mat::Zero(m, n);
  const auto rowsWanted = std::max<Index>(
      N, static_cast<Index>(std::ceil(static_cast<double>(N) * scenario.learner.oversampling - 1e-12)));
  auto usable = [&](const RegressionSystem& sys) {
    return sys.rows() >= rowsWanted && sys.conditionNumber() <= scenario.learner.kappaMax;
  };
  for (int k = 0;; ++k) {
    if (static_cast<Index>(buffer.size()) >= rowsWanted &&
        usable(recomputeRows(buffer, TargetPolicy::matrix(zero), knowledge, OffPolicyTarget::MinimumIntervention)) &&
        usable(recomputeRows(buffer, TargetPolicy::humanSignal(), knowledge, OffPolicyTarget::Takeover)))
      break;
    if (k >= scenario.learner.maxSegmentsPerIteration) {
      const RegressionSystem sys =
          recomputeRows(buffer, TargetPolicy::matrix(zero), knowledge, OffPolicyTarget::MinimumIntervention);
      throw CollinearityError("shared off-policy buffer stayed collinear", sys.numericalRank(), N,
                              sys.conditionNumber());
    }
    buffer.append(sim.exploit(zero));
    sim.nudge(zero);
  }

  SharedScenario minScenario = scenario;
  minScenario.mode = LearningMode::OffPolicyMinIntervention;
  SharedScenario takeScenario = scenario;
  takeScenario.mode = LearningMode::OffPolicyTakeover;

  auto learn = [&](const SharedScenario& s, OffPolicyTarget target) {
    ExperimentReport r;
    r.mode = s.mode;
    r.oracle = buildTarget(s);
    r.learning = runOffPolicyOnBuffer(buffer, knowledge, offPolicyOptions(s, target), r.oracle.Pstar);
    r.learning.totalSegments = static_cast<int>(buffer.size());
    if (!r.learning.iterations.empty()) r.learning.iterations.front().freshSegments = static_cast<int>(buffer.size());
    finalize(r);
    return r;
  };
  auto minFuture = std::async(std::launch::async, learn, std::cref(minScenario), OffPolicyTarget::MinimumIntervention);
  auto takeFuture = std::async(std::launch::async, learn, std::cref(takeScenario), OffPolicyTarget::Takeover);

  ParallelOffPolicyReport out{buffer, minFuture.get(), takeFuture.get()};
  out.minIntervention.trajectory = sim.trajectory();
  out.minIntervention.nudges = sim.nudgeHistory();
  out.takeover.trajectory = sim.trajectory();
  out.takeover.nudges = sim.nudgeHistory();
  out.minIntervention.buffer = buffer;
  out.takeover.buffer = buffer;
  return out;
}

PostExitReport verifyTakeoverAfterExit(const SharedScenario& scenario, const Mat& Klearned,
                                       const Mat& Plearned) {
  const Mat& A = scenario.plant.A;
  const Mat& B = scenario.plant.B;
  requireShape(Klearned, B.cols(), A.rows(), "verifyTakeoverAfterExit: K");
  requireShape(Plearned, A.rows(), A.rows(), "verifyTakeoverAfterExit: P");
  PostExitReport r;
  const Vec& x0 = scenario.x0;
  r.predictedCost = x0.dot(Plearned * x0);
  const double abscissa = spectralAbscissa(A + B * Klearned);
  if (!(abscissa < 0.0)) return r;
  r.stable = true;
  if (x0.norm() == 0.0) {
    r.passed = true;
    return r;
  }

  // Twenty slowest time constants leave e^-20 of the state and e^-40 of the
  // cost integrand, with room for polynomial factors from repeated modes.
  r.horizon = 20.0 / -abscissa;
  const double fastest = eigenvalues(A + B * Klearned).cwiseAbs().maxCoeff();
  const double step = std::min(0.01, 0.05 / std::max(fastest, 1e-12));
  CostWeights w = scenario.weights;
  w.tau = r.horizon;
  const auto substeps = std::max(10, static_cast<int>(std::ceil(r.horizon / step)));
  const SegmentRecord rec = simulateSegment(scenario.plant, nullptr, Klearned, x0, w, {substeps, 0.0});
  r.realizedCost = rec.rX + rec.rUaR;
  r.finalStateRatio = rec.xEnd.norm() / x0.norm();
  r.relativeCostError = std::abs(r.realizedCost - r.predictedCost) / std::max(std::abs(r.predictedCost), 1e-300);
  r.passed = r.finalStateRatio <= 1e-3 && r.relativeCostError <= 0.01;
  return r;
}

double valueEquationResidual(const Mat& P, const Mat& K, const std::vector<SegmentRecord>& segments,
                             const LearnerKnowledge& knowledge) {
  const WeightVector W = weightsFromMatrix(P);
  double worst = 0.0;
  for (const auto& seg : segments) {
    const double reward = seg.rX + seg.rUh + seg.quadraticIntegral(K.transpose() * knowledge.R * K);
    const double res = seg.phiDifference().dot(W.w) + reward;
    worst = std::max(worst, std::abs(res) / std::max(std::abs(reward), 1e-300));
  }
  return worst;
}

}  // namespace slqr
