// slqr: command-line front end for the shared-LQR learners and analyses.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slqr/analysis.hpp"
#include "slqr/errors.hpp"
#include "slqr/io.hpp"
#include "slqr/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace slqr;
using io::json;

namespace {

constexpr double kAcceptTolerance = 1e-3;

struct RunConfig {
  std::string scenarioPath;
  std::string outDir = "slqr_out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string mode = "all";
  std::string target = "plain";
};

SharedScenario buildScenario(const RunConfig& cfg, LearningMode mode) {
  SharedScenario s = cfg.scenarioPath.empty() ? carFollowingScenario(mode) : io::loadScenario(cfg.scenarioPath);
  s.mode = mode;
  if (cfg.seed) s.nudge.seed = *cfg.seed;
  for (const auto& o : cfg.overrides) io::applyOverride(s, o);
  return s;
}

fs::path prepareDir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

json csvSchema() {
  return {{"convergence", io::kConvergenceCsvVersion}, {"trajectory", io::kTrajectoryCsvVersion}};
}

// Runs one learning mode and writes its report files. Diagnostics are written
// even when the learner fails.
json runMode(const SharedScenario& scenario, const fs::path& dir) {
  prepareDir(dir);
  json summary;
  summary["schema_version"] = 1;
  summary["csv_schema"] = csvSchema();
  summary["scenario"] = io::scenarioToJson(scenario);
  summary["mode"] = toString(scenario.mode);

  const AreTarget oracle = buildTarget(scenario);
  io::writeJsonFile(dir / "oracle.json", io::areTargetToJson(oracle));

  try {
    const ExperimentReport r = runScenario(scenario);
    std::ostringstream conv, traj;
    io::writeConvergenceCsv(conv, r.learning, r.oracle.Pstar);
    io::writeTrajectoryCsv(traj, r.trajectory, scenario.plant.stateDim(), scenario.plant.inputDim());
    writeText(dir / "convergence.csv", conv.str());
    writeText(dir / "trajectory.csv", traj.str());
    if (r.buffer) io::writeJsonFile(dir / "buffer.json", io::replayBufferToJson(*r.buffer));

    summary["report"] = io::experimentToJson(r, kAcceptTolerance);
    bool passed = summary["report"]["passed"].get<bool>();
    if (scenario.mode == LearningMode::OffPolicyTakeover) {
      const PostExitReport exit = verifyTakeoverAfterExit(scenario, r.learnedK, r.learnedP);
      summary["post_exit"] = io::postExitToJson(exit);
      passed = passed && exit.passed;
    }
    summary["passed"] = passed;
  } catch (const CollinearityError& e) {
    summary["passed"] = false;
    summary["error"] = {{"type", "collinearity"},
                        {"message", e.what()},
                        {"numerical_rank", e.numericalRank()},
                        {"expected_rank", e.expectedRank()},
                        {"condition_number", io::round15(e.conditionNumber())}};
    std::cerr << toString(scenario.mode) << ": collinearity error: " << e.what() << '\n';
  } catch (const Error& e) {
    summary["passed"] = false;
    summary["error"] = {{"type", "numerical"}, {"message", e.what()}};
    std::cerr << toString(scenario.mode) << ": error: " << e.what() << '\n';
  }
  io::writeJsonFile(dir / "summary.json", summary);
  return summary;
}

void printMode(const json& s) {
  std::cout << s["mode"].get<std::string>() << ": ";
  if (s.contains("report")) {
    const json& r = s["report"];
    std::cout << "relative error " << io::formatNumber(r["relative_error"].is_null() ? NAN : r["relative_error"].get<double>())
              << ", iterations " << r["iterations"] << ", segments " << r["total_segments"];
    if (s.contains("post_exit"))
      std::cout << ", post-exit cost error "
                << io::formatNumber(s["post_exit"]["relative_cost_error"].get<double>());
  } else {
    std::cout << s["error"]["message"].get<std::string>();
  }
  std::cout << (s["passed"].get<bool>() ? "  [pass]" : "  [FAIL]") << '\n';
}

int cmdLearn(const RunConfig& cfg, LearningMode mode) {
  const SharedScenario s = buildScenario(cfg, mode);
  const json summary = runMode(s, cfg.outDir);
  printMode(summary);
  return summary["passed"].get<bool>() ? 0 : 1;
}

int cmdCarfollow(const RunConfig& cfg) {
  json top;
  top["schema_version"] = 1;
  top["csv_schema"] = csvSchema();
  bool all = true;
  json modes = json::object();
  for (LearningMode m : {LearningMode::OnPolicyMinIntervention, LearningMode::OffPolicyMinIntervention,
                         LearningMode::OffPolicyTakeover}) {
    const SharedScenario s = buildScenario(cfg, m);
    const json summary = runMode(s, fs::path(cfg.outDir) / toString(m));
    printMode(summary);
    json entry = {{"passed", summary["passed"]}};
    if (summary.contains("report")) {
      entry["relative_error"] = summary["report"]["relative_error"];
      entry["iterations"] = summary["report"]["iterations"];
      entry["total_segments"] = summary["report"]["total_segments"];
    }
    if (summary.contains("post_exit")) entry["post_exit"] = summary["post_exit"];
    if (summary.contains("error")) entry["error"] = summary["error"];
    modes[toString(m)] = entry;
    all = all && summary["passed"].get<bool>();
  }
  top["modes"] = modes;
  top["tolerance"] = kAcceptTolerance;
  top["passed"] = all;
  prepareDir(cfg.outDir);
  io::writeJsonFile(fs::path(cfg.outDir) / "summary.json", top);
  return all ? 0 : 1;
}

int cmdCare(const RunConfig& cfg) {
  io::CareProblem p;
  if (cfg.scenarioPath.empty()) {
    SharedScenario s = carFollowingScenario(LearningMode::OffPolicyTakeover);
    const AreTarget t = cfg.target == "shared" ? buildMinInterventionTarget(s) : buildTakeoverTarget(s);
    p = {t.Aeff, t.B, t.Qeff, t.R, std::nullopt};
  } else {
    json j = io::readJsonFile(cfg.scenarioPath);
    if (cfg.target != "plain") j["target"] = cfg.target;
    p = io::careProblemFromJson(j);
  }
  Mat K0;
  if (p.K0) {
    K0 = *p.K0;
  } else if (isHurwitz(p.A)) {
    K0 = Mat::Zero(p.B.cols(), p.A.rows());
  } else {
    K0 = bassStabilizingGain(p.A, p.B);
  }
  const CareSolution sol = kleinmanCare(p.A, p.B, p.Q, p.R, K0);
  AreTarget t{p.A, p.B, p.Q, p.R, sol.P, sol.K, careResidual(p.A, p.B, p.Q, p.R, sol.P).norm()};
  const Eigen::VectorXcd ev = eigenvalues(p.A + p.B * sol.K);
  const bool passed = t.residual <= 1e-8 && isHurwitz(p.A + p.B * sol.K);

  Eigen::IOFormat fmt(Eigen::FullPrecision, 0, ", ", "\n", "  [", "]");
  std::cout << "P* =\n" << sol.P.format(fmt) << "\nK* =\n" << sol.K.format(fmt) << "\nresidual "
            << io::formatNumber(t.residual) << ", iterations " << sol.iterations << "\neigenvalues";
  for (Index i = 0; i < ev.size(); ++i) std::cout << ' ' << io::formatNumber(ev(i).real()) << (ev(i).imag() >= 0 ? "+" : "") << io::formatNumber(ev(i).imag()) << 'i';
  std::cout << '\n';

  prepareDir(cfg.outDir);
  json j = io::areTargetToJson(t);
  j["iterations"] = sol.iterations;
  j["passed"] = passed;
  io::writeJsonFile(fs::path(cfg.outDir) / "oracle.json", j);
  return passed ? 0 : 1;
}

int cmdAnalysis(const RunConfig& cfg) {
  static const std::vector<std::string> known = {"theorem1a", "theorem1b", "lemma4", "theorem2"};
  std::vector<std::string> demos;
  int trials = 20;
  if (!cfg.scenarioPath.empty()) {
    const json j = io::readJsonFile(cfg.scenarioPath);
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (key != "schema_version" && key != "demos" && key != "trials")
        throw ConfigError("analysis scenario: unknown key '" + key + "'");
    }
    if (j.contains("demos")) demos = j["demos"].get<std::vector<std::string>>();
    if (j.contains("trials")) trials = j["trials"].get<int>();
  }
  if (demos.empty()) {
    if (cfg.mode == "all") demos = known;
    else demos = {cfg.mode};
  }
  const std::uint64_t seed = cfg.seed.value_or(1);
  prepareDir(cfg.outDir);
  bool all = true;
  for (const auto& d : demos) {
    json report;
    if (d == "theorem1a") report = io::theorem1aToJson(theorem1aDemo(trials, seed));
    else if (d == "theorem1b") report = io::theorem1bToJson(theorem1bDemo());
    else if (d == "lemma4") report = io::lemma4ToJson(lemma4Demo(lemma4Plant(), trials, seed));
    else if (d == "theorem2") report = io::theorem2ToJson(theorem2Demo(seed));
    else throw ConfigError("unknown analysis demo '" + d + "'");
    io::writeJsonFile(fs::path(cfg.outDir) / (d + ".json"), report);
    const bool ok = report["passed"].get<bool>();
    std::cout << d << (ok ? ": expected outcome" : ": UNEXPECTED outcome") << '\n';
    all = all && ok;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-LQR integral reinforcement learning"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", cfg.scenarioPath, "Scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option("--out", cfg.outDir, "Output directory")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Exploration seed");
    sub->add_option("--override", cfg.overrides, "KEY=VALUE (repeatable)");
  };

  auto* care = app.add_subcommand("care", "Solve an algebraic Riccati equation by Kleinman iteration");
  common(care);
  care->add_option("--target", cfg.target, "plain or shared")->check(CLI::IsMember({"plain", "shared"}));
  auto* on = app.add_subcommand("onpolicy", "On-policy minimum-intervention learning");
  common(on);
  auto* off = app.add_subcommand("offpolicy", "Off-policy minimum-intervention learning with replay");
  common(off);
  auto* take = app.add_subcommand("takeover", "Off-policy takeover learning with the human in the loop");
  common(take);
  auto* ana = app.add_subcommand("analysis", "Solvability and collinearity demonstrations");
  common(ana);
  ana->add_option("--mode", cfg.mode, "theorem1a, theorem1b, lemma4, theorem2 or all")
      ->check(CLI::IsMember({"all", "theorem1a", "theorem1b", "lemma4", "theorem2"}));
  auto* car = app.add_subcommand("carfollow", "Car-following experiment in all three modes");
  common(car);

  CLI11_PARSE(app, argc, argv);

  try {
    if (care->parsed()) return cmdCare(cfg);
    if (on->parsed()) return cmdLearn(cfg, LearningMode::OnPolicyMinIntervention);
    if (off->parsed()) return cmdLearn(cfg, LearningMode::OffPolicyMinIntervention);
    if (take->parsed()) return cmdLearn(cfg, LearningMode::OffPolicyTakeover);
    if (ana->parsed()) return cmdAnalysis(cfg);
    if (car->parsed()) return cmdCarfollow(cfg);
  } catch (const CollinearityError& e) {
    std::cerr << "collinearity error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
