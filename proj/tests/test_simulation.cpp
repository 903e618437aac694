#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "slqr/errors.hpp"
#include "slqr/orchestrator.hpp"
#include "slqr/simulation.hpp"

using namespace slqr;

namespace {

double maxRel(const Vec& a, const Vec& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("segment integrals agree with the closed-form window") {
  const SharedScenario s = carFollowingScenario();
  const Mat& A = s.plant.A;
  const Mat& B = s.plant.B;
  const Mat Keff = s.human.effectiveGain();
  Mat F(1, 3);
  F << 0.3, -0.2, 0.1;
  Vec x0(3);
  x0 << 1.0, 2.0, -1.0;

  const SegmentRecord seg = simulateSegment(s.plant, &s.human, F, x0, s.weights);
  const oracle::Window w = oracle::window(A + B * (Keff + F), x0, s.weights.tau);

  CHECK((seg.xEnd - w.xEnd).norm() <= 1e-9);
  CHECK(maxRel(seg.moments, oracle::lowerStack(w.G)) <= 1e-9);
  CHECK(seg.rX == doctest::Approx(w.quad(s.weights.Q)).epsilon(1e-9));
  CHECK(seg.rUh == doctest::Approx(w.quad(Keff.transpose() * s.weights.M * Keff)).epsilon(1e-9));
  CHECK(seg.rUhR == doctest::Approx(w.quad(Keff.transpose() * s.weights.R * Keff)).epsilon(1e-9));
  CHECK(seg.rUaR == doctest::Approx(w.quad(F.transpose() * s.weights.R * F)).epsilon(1e-9));
  CHECK(maxRel(seg.deltaUh, w.delta(B * Keff)) <= 1e-9);
  CHECK(maxRel(seg.deltaUa, w.delta(B * F)) <= 1e-9);
  for (Index q = 0; q < 3; ++q) {
    Mat E = Mat::Zero(1, 3);
    E(0, q) = 1.0;
    CHECK(maxRel(seg.deltaBasis.row(q).transpose(), w.delta(B * E)) <= 1e-9);
  }
  // deltaForGain is linear in the gain and reproduces deltaUa.
  CHECK(maxRel(seg.deltaForGain(F), seg.deltaUa) <= 1e-12);
}

TEST_CASE("segment flow matches the matrix exponential") {
  const SharedScenario s = carFollowingScenario();
  const Mat Acl = s.plant.A + s.plant.B * s.human.effectiveGain();
  Vec x0(3);
  x0 << -0.4, 1.5, 0.9;
  CostWeights w = s.weights;
  for (double tau : {0.01, 0.1, 1.0}) {
    w.tau = tau;
    const SegmentRecord seg = simulateSegment(s.plant, &s.human, Mat::Zero(1, 3), x0, w);
    CHECK((seg.xEnd - expmAt(Acl, tau) * x0).norm() <= 1e-9 * x0.norm());
  }
}

TEST_CASE("quadrature Richardson check: halving the step changes integrals < 1e-8") {
  const SharedScenario s = carFollowingScenario();
  Mat F(1, 3);
  F << -0.5, 0.4, 0.2;
  SegmentOptions coarse, fine;
  coarse.substeps = 100;
  fine.substeps = 200;
  const SegmentRecord a = simulateSegment(s.plant, &s.human, F, s.x0, s.weights, coarse);
  const SegmentRecord b = simulateSegment(s.plant, &s.human, F, s.x0, s.weights, fine);
  CHECK(std::abs(a.rX - b.rX) <= 1e-8 * std::abs(b.rX));
  CHECK(std::abs(a.rUh - b.rUh) <= 1e-8 * std::abs(b.rUh));
  CHECK(maxRel(a.moments, b.moments) <= 1e-8);
  CHECK(maxRel(a.deltaUa, b.deltaUa) <= 1e-8);
  CHECK(maxRel(a.deltaUh, b.deltaUh) <= 1e-8);
}

TEST_CASE("target control cost: moment path equals direct integration") {
  const SharedScenario s = carFollowingScenario();
  Mat K(1, 3);
  K << 0.7, -0.3, 0.25;
  const SegmentRecord seg = simulateSegment(s.plant, &s.human, K, s.x0, s.weights);
  const double fromMoments = seg.quadraticIntegral(K.transpose() * s.weights.R * K);
  CHECK(fromMoments == doctest::Approx(seg.rUaR).epsilon(1e-12));
}

TEST_CASE("moments reconstruct every quadratic integral") {
  const SharedScenario s = carFollowingScenario();
  const SegmentRecord seg = simulateSegment(s.plant, &s.human, Mat::Zero(1, 3), s.x0, s.weights);
  const oracle::Window w = oracle::window(s.plant.A + s.plant.B * s.human.effectiveGain(), s.x0, s.weights.tau);
  for (Index p = 0; p < 3; ++p)
    for (Index q = 0; q < 3; ++q) {
      Mat E = Mat::Zero(3, 3);
      E(p, q) = 1.0;
      CHECK(seg.quadraticIntegral(symmetrize(E)) == doctest::Approx(w.G(p, q)).epsilon(1e-9));
    }
}

TEST_CASE("zero behavior input gives a zero delta row") {
  const SharedScenario s = carFollowingScenario();
  const SegmentRecord seg = simulateSegment(s.plant, &s.human, Mat::Zero(1, 3), s.x0, s.weights);
  CHECK(seg.deltaUa.norm() == 0.0);
  CHECK(seg.rUaR == 0.0);
  const SegmentRecord alone = simulateSegment(s.plant, nullptr, Mat::Zero(1, 3), s.x0, s.weights);
  CHECK(alone.deltaUh.norm() == 0.0);
  CHECK(alone.rUh == 0.0);
}

TEST_CASE("determinism: identical inputs give bit-identical records") {
  SharedScenario s = carFollowingScenario();
  auto run = [&] {
    SharedLoopSimulator sim(s.plant, s.human, s.weights, s.nudge, s.x0);
    std::vector<SegmentRecord> out;
    for (int k = 0; k < 8; ++k) {
      out.push_back(sim.exploit(Mat::Zero(1, 3)));
      sim.nudge(Mat::Zero(1, 3));
    }
    return out;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].xStart == b[k].xStart);
    CHECK(a[k].xEnd == b[k].xEnd);
    CHECK(a[k].moments == b[k].moments);
    CHECK(a[k].rX == b[k].rX);
  }
}

TEST_CASE("nudges act only between segments") {
  const SharedScenario s = carFollowingScenario();
  const Mat Acl = s.plant.A + s.plant.B * s.human.effectiveGain();
  SharedLoopSimulator sim(s.plant, s.human, s.weights, s.nudge, s.x0);
  Vec prevEnd;
  for (int k = 0; k < 6; ++k) {
    const SegmentRecord seg = sim.exploit(Mat::Zero(1, 3));
    CHECK((seg.xEnd - expmAt(Acl, s.weights.tau) * seg.xStart).norm() <= 1e-9);
    if (k > 0) CHECK((seg.xStart - prevEnd).norm() > 0.0);  // the nudge moved the state
    prevEnd = seg.xEnd;
    sim.nudge(Mat::Zero(1, 3));
  }
  REQUIRE(sim.nudgeHistory().size() == 6);
  // Adaptive amplitude: at most max(floor, 10% of the segment RMS input).
  for (const Vec& b : sim.nudgeHistory()) CHECK(b.cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("fixed zero amplitude keeps a single trajectory") {
  SharedScenario s = carFollowingScenario();
  s.nudge.amplitude = 0.0;
  const Mat Acl = s.plant.A + s.plant.B * s.human.effectiveGain();
  SharedLoopSimulator sim(s.plant, s.human, s.weights, s.nudge, s.x0);
  sim.exploit(Mat::Zero(1, 3));
  sim.nudge(Mat::Zero(1, 3));
  const SegmentRecord second = sim.exploit(Mat::Zero(1, 3));
  CHECK((second.xStart - expmAt(Acl, s.weights.tau + s.nudge.holdDuration) * s.x0).norm() <= 1e-9);
}

TEST_CASE("teleport mode keeps the state norm") {
  SharedScenario s = carFollowingScenario();
  s.nudge.teleport = true;
  SharedLoopSimulator sim(s.plant, s.human, s.weights, s.nudge, s.x0);
  const SegmentRecord seg = sim.exploit(Mat::Zero(1, 3));
  sim.nudge(Mat::Zero(1, 3));
  CHECK(sim.state().norm() == doctest::Approx(seg.xEnd.norm()).epsilon(1e-12));
}

TEST_CASE("configuration errors") {
  Mat A(2, 2), B(2, 1);
  A << 1, 0, 0, -1;
  B << 0, 1;
  CHECK_THROWS_AS(LtiPlant(A, B), ConfigError);  // unstable, uncontrollable mode
  CHECK_FALSE(isStabilizable(A, B));
  CHECK(isStabilizable(-A * A, B));

  CostWeights w{Mat::Identity(2, 2), Mat::Identity(1, 1), -Mat::Identity(1, 1), 0.01};
  CHECK_THROWS_AS(w.validate(2, 1), ConfigError);
  w.R = Mat::Identity(1, 1);
  w.tau = 0.0;
  CHECK_THROWS_AS(w.validate(2, 1), ConfigError);

  SharedScenario s = carFollowingScenario();
  SegmentOptions few;
  few.substeps = 3;
  CHECK_THROWS_AS(simulateSegment(s.plant, &s.human, Mat::Zero(1, 3), s.x0, s.weights, few), ConfigError);
}

TEST_CASE("non-finite state raises a simulation error") {
  Mat A(1, 1), B(1, 1);
  A << 50.0;
  B << 1.0;
  const LtiPlant plant(A, B);
  CostWeights w{Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1), 5.0};
  Vec x0(1);
  x0 << 1e300;
  CHECK_THROWS_AS(simulateSegment(plant, nullptr, Mat::Zero(1, 1), x0, w), SimulationError);
}

}  // TEST_SUITE
