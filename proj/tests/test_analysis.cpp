#include <doctest.h>

#include "oracles.hpp"
#include "slqr/analysis.hpp"
#include "slqr/errors.hpp"
#include "slqr/orchestrator.hpp"

using namespace slqr;

namespace {

AnalysisProblem carProblem() {
  const SharedScenario s = carFollowingScenario();
  return {s.plant.A, s.plant.B, s.weights.Q, s.weights.R};
}

Mat humanGain() { return carFollowingScenario().human.effectiveGain(); }

std::vector<Vec> someStarts() {
  std::vector<Vec> out;
  for (int k = 0; k < 8; ++k) {
    Vec x(3);
    x << std::cos(k), std::sin(1.7 * k), 0.3 * k - 1.0;
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("B-aware regression recovers P_i for any behavior") {
  const AnalysisProblem p = carProblem();
  const Mat Ki = humanGain();
  const Mat Pi = oracle::gramianLong((p.A + p.B * Ki).transpose(), p.Q + Ki.transpose() * p.R * Ki, 80.0);
  CHECK((policyValue(p, Ki) - Pi).norm() <= 1e-9 * Pi.norm());
  for (double f : {0.0, -0.5, 0.8}) {
    Mat F = Ki;
    F(0, 0) += f;
    const auto segs = generateTestSegments(p, F, someStarts(), 0.05);
    const DataSolve s = solveBAwareFromData(p, Ki, segs);
    CHECK(s.rank == 6);
    CHECK((s.P - Pi).norm() <= 1e-6 * Pi.norm());
    CHECK(residualBAware(Pi, Ki, F, p, segs) <= 1e-9);
  }
}

TEST_CASE("alternative pairs of the B-free equation") {
  const AnalysisProblem p = carProblem();
  const Mat Ki = humanGain();
  const auto starts = someStarts();

  SUBCASE("shared eigenvalue: kernel-shifted P") {
    const Mat F = Mat::Zero(1, 3);  // A has eigenvalue 0
    CHECK(hasMirroredEigenvalue(p.A + p.B * F));
    const AlternativePair alt = constructAlternativePair(p, Ki, F);
    CHECK(alt.eigenCase == EigenvalueCase::CommonEigenvalue);
    const auto segs = generateTestSegments(p, F, starts, 0.01);
    CHECK(residualBFree(alt.pair, Ki, F, p, segs) <= 1e-8);
    CHECK(residualBFree(alt.kleinmanPair, Ki, F, p, segs) <= 1e-8);
    CHECK(alt.relativeDifference >= 1e-3);
    CHECK_FALSE(alt.coincides);
    CHECK(alt.pair.residualAlgebraic <= 1e-9);
  }
  SUBCASE("no shared eigenvalue: {P_W1, 0}") {
    Mat F = Ki;
    F(0, 2) -= 1.0;
    CHECK_FALSE(hasMirroredEigenvalue(p.A + p.B * F));
    const AlternativePair alt = constructAlternativePair(p, Ki, F);
    CHECK(alt.eigenCase == EigenvalueCase::NoCommonEigenvalue);
    CHECK(alt.pair.Khat.norm() == 0.0);
    const auto segs = generateTestSegments(p, F, starts, 0.01);
    CHECK(residualBFree(alt.pair, Ki, F, p, segs) <= 1e-8);
    CHECK(alt.relativeDifference >= 1e-3);
  }
  SUBCASE("F = K_i reproduces P_i and reports coincidence") {
    const AlternativePair alt = constructAlternativePair(p, Ki, Ki);
    CHECK(alt.coincides);
    CHECK(alt.relativeDifference <= 1e-9);
  }
  SUBCASE("non-stabilizing K_i is rejected") {
    CHECK_THROWS_AS(constructAlternativePair(p, Mat::Zero(1, 3), Ki), NotStabilizingError);
  }
}

TEST_CASE("single-trajectory rank under the degenerate-spectrum hypothesis") {
  const Mat A = lemma4Plant();
  CHECK(inspectSpectrum(A).holds());
  Vec x0(3);
  x0 << 0.3, -0.7, 0.5;
  const RankReport r = singleTrajectoryRank(A, x0, 12, 0.1);
  CHECK(r.numericalRank <= 5);
  CHECK(r.numericalRank == 3);  // span{e^{-2t}, e^{-3t}, e^{-4t}} of the features
  CHECK(r.rows == 12);

  // Simple spectrum: out of hypothesis.
  Mat S(3, 3);
  S << -1, 0, 0, 0, -2, 0, 0, 0, -3;
  CHECK_FALSE(inspectSpectrum(S).holds());
  CHECK_THROWS_AS(singleTrajectoryRank(S, x0, 12, 0.1), ConfigError);
  const RankReport free = singleTrajectoryRank(S, x0, 12, 0.1, false);
  CHECK_FALSE(free.hypothesisHolds);
  CHECK_FALSE(free.note.empty());

  // Non-diagonalizable (Jordan block) closed loop.
  Mat J(3, 3);
  J << -1, 1, 0, 0, -1, 0, 0, 0, -2;
  CHECK_FALSE(inspectSpectrum(J).diagonalizable);
}

TEST_CASE("distinct trajectories and rank") {
  const SharedScenario s = carFollowingScenario();
  const Mat Ah = s.plant.A + s.plant.B * s.human.effectiveGain();
  for (int T = 1; T < 6; ++T) {
    const RankReport r = distinctTrajectoryNecessity(Ah, T, s.weights.tau, 100 + T);
    CHECK(r.numericalRank <= T);
    CHECK(r.distinctTrajectoryCount == T);
  }
  const RankReport full = distinctTrajectoryNecessity(Ah, 6, s.weights.tau, 77);
  CHECK(full.numericalRank == 6);
  CHECK(full.draws <= 5);

  // Identical starts collapse onto a single trajectory.
  std::vector<Vec> same(6, s.x0);
  const RankReport r = trajectoryRank(Ah, same, s.weights.tau);
  CHECK(r.numericalRank == 1);
  CHECK(r.distinctTrajectoryCount == 1);

  // A later point of the same orbit is not distinct.
  const Vec later = expmAt(Ah, 0.37) * s.x0;
  CHECK(onSameOrbit(Ah, s.x0, later, 5.0, 5001, 1e-3));
  CHECK_FALSE(onSameOrbit(Ah, s.x0, Vec::Unit(3, 0)));
}

TEST_CASE("demonstrations report expected outcomes") {
  CHECK(theorem1aDemo(5, 3).passed);
  CHECK(theorem1bDemo().passed);
  const Lemma4Result l = lemma4Demo(lemma4Plant(), 5, 4);
  CHECK(l.passed);
  CHECK(l.maxRank <= 5);
  CHECK(theorem2Demo(9).passed);
}

}  // TEST_SUITE
