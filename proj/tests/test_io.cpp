#include <doctest.h>

#include <sstream>

#include "slqr/errors.hpp"
#include "slqr/io.hpp"

using namespace slqr;
using io::json;

TEST_SUITE("io") {

TEST_CASE("number formatting keeps 15 significant digits") {
  CHECK(io::formatNumber(1.0 / 3.0) == "0.333333333333333");
  CHECK(io::formatNumber(2.0) == "2");
  CHECK(io::formatNumber(-1.5e-20) == "-1.5e-20");
  CHECK(io::formatNumber(std::nan("")) == "nan");
  CHECK(io::round15(0.1 + 0.2) == 0.3);
}

TEST_CASE("scenario round trip") {
  SharedScenario s = carFollowingScenario(LearningMode::OffPolicyTakeover, 42);
  s.nudge.amplitude = 0.25;
  s.learner.kappaMax = 1e7;
  const SharedScenario back = io::scenarioFromJson(io::scenarioToJson(s));
  CHECK(back.plant.A == s.plant.A);
  CHECK(back.plant.B == s.plant.B);
  CHECK(back.human.Kh == s.human.Kh);
  CHECK(back.human.Ch == s.human.Ch);
  CHECK(back.weights.Q == s.weights.Q);
  CHECK(back.weights.tau == s.weights.tau);
  CHECK((back.mode == LearningMode::OffPolicyTakeover));
  CHECK(back.nudge.seed == 42);
  REQUIRE(back.nudge.amplitude);
  CHECK(*back.nudge.amplitude == 0.25);
  CHECK(back.learner.kappaMax == 1e7);
  CHECK(back.x0 == s.x0);
}

TEST_CASE("scenario validation") {
  json j = io::scenarioToJson(carFollowingScenario());
  SUBCASE("unknown key") {
    j["extra"] = 1;
    CHECK_THROWS_AS(io::scenarioFromJson(j), ConfigError);
  }
  SUBCASE("unknown nested key") {
    j["nudge"]["strength"] = 1;
    CHECK_THROWS_AS(io::scenarioFromJson(j), ConfigError);
  }
  SUBCASE("wrong schema version") {
    j["schema_version"] = 99;
    CHECK_THROWS_AS(io::scenarioFromJson(j), ConfigError);
  }
  SUBCASE("ragged matrix") {
    j["A"][1] = json::array({1, 2});
    CHECK_THROWS_AS(io::scenarioFromJson(j), ConfigError);
  }
  SUBCASE("unstable human loop") {
    j["human"]["Kh"] = json::array({json::array({0, 0})});
    CHECK_THROWS_AS(io::scenarioFromJson(j), ConfigError);
  }
  SUBCASE("row-major layout") {
    const SharedScenario s = io::scenarioFromJson(j);
    CHECK(s.plant.A(1, 0) == 1.0);
    CHECK(s.plant.A(1, 2) == -1.0);
  }
}

TEST_CASE("overrides") {
  SharedScenario s = carFollowingScenario();
  io::applyOverride(s, "tau=0.02");
  io::applyOverride(s, "amplitude=0");
  io::applyOverride(s, "kappaMax=1e6");
  io::applyOverride(s, "tolerance=1e-8");
  io::applyOverride(s, "substeps=50");
  CHECK(s.weights.tau == 0.02);
  REQUIRE(s.nudge.amplitude);
  CHECK(*s.nudge.amplitude == 0.0);
  CHECK(s.learner.kappaMax == 1e6);
  CHECK(s.learner.stop.relTol == 1e-8);
  CHECK(s.learner.substeps == 50);
  io::applyOverride(s, "amplitude=adaptive");
  CHECK_FALSE(s.nudge.amplitude);
  CHECK_THROWS_AS(io::applyOverride(s, "bogus=1"), ConfigError);
  CHECK_THROWS_AS(io::applyOverride(s, "tau"), ConfigError);
  CHECK_THROWS_AS(io::applyOverride(s, "tau=abc"), ConfigError);
  CHECK_THROWS_AS(io::applyOverride(s, "substeps=2.5"), ConfigError);
  CHECK_THROWS_AS(io::applyOverride(s, "tau=-1"), ConfigError);
}

TEST_CASE("care problem files") {
  json j = {{"schema_version", 1},
            {"A", {{0.0}}},
            {"B", {{1.0}}},
            {"Q", {{1.0}}},
            {"R", {{1.0}}},
            {"K0", {{-1.0}}}};
  const io::CareProblem p = io::careProblemFromJson(j);
  REQUIRE(p.K0);
  CHECK((*p.K0)(0, 0) == -1.0);
  j["K0"] = "auto";
  CHECK_FALSE(io::careProblemFromJson(j).K0);
  j["oops"] = 1;
  CHECK_THROWS_AS(io::careProblemFromJson(j), ConfigError);

  json full = io::scenarioToJson(carFollowingScenario());
  full["target"] = "shared";
  const io::CareProblem shared = io::careProblemFromJson(full);
  CHECK(shared.A(2, 1) == 1.0);  // A + B [0 1 -1]
  CHECK(shared.Q(1, 1) == 6.0);  // Q + Keff^T M Keff
}

TEST_CASE("replay buffer round trip is exact") {
  SharedScenario s = carFollowingScenario(LearningMode::OffPolicyMinIntervention);
  SharedLoopSimulator sim(s.plant, s.human, s.weights, s.nudge, s.x0);
  Mat F(1, 3);
  F << 0.1, 0.0, -0.1;
  const ReplayBuffer buf = collectOffPolicyData(sim, 4, F, s.weights.tau, 100);
  const ReplayBuffer back = io::replayBufferFromJson(json::parse(io::replayBufferToJson(buf).dump()));
  REQUIRE(back.size() == buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) {
    const auto& a = buf.segments()[k];
    const auto& b = back.segments()[k];
    CHECK(a.xStart == b.xStart);
    CHECK(a.xEnd == b.xEnd);
    CHECK(a.moments == b.moments);
    CHECK(a.deltaBasis == b.deltaBasis);
    CHECK(a.deltaUh == b.deltaUh);
    CHECK(a.rX == b.rX);
    CHECK(a.rUhR == b.rUhR);
  }
  json bad = io::replayBufferToJson(buf);
  bad["segments"][0]["moments"] = json::array({1.0});
  CHECK_THROWS_AS(io::replayBufferFromJson(bad), DimensionError);
}

TEST_CASE("csv layouts") {
  TrajectoryLog log;
  log.samples.push_back({0.0, (Vec(2) << 1.0, 2.0).finished(), (Vec(1) << 0.5).finished(),
                         (Vec(1) << -0.25).finished()});
  std::ostringstream os;
  io::writeTrajectoryCsv(os, log, 2, 1);
  CHECK(os.str() == "t,x1,x2,u_h,u_a\n0,1,2,0.5,-0.25\n");

  ConvergenceReport r;
  IterationRecord it;
  it.iteration = 0;
  it.errorToOracle = 0.5;
  it.conditionNumber = 10.0;
  it.rank = 3;
  it.segmentsUsed = 3;
  it.freshSegments = 3;
  r.iterations.push_back(it);
  std::ostringstream cs;
  io::writeConvergenceCsv(cs, r, 2.0 * Mat::Identity(1, 1));
  CHECK(cs.str() ==
        "iteration,delta_p,error_to_oracle,relative_error,condition_number,rank,segments_used,fresh_segments\n"
        "0,nan,0.5,0.25,10,3,3,3\n");
}

}  // TEST_SUITE
