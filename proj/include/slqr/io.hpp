#pragma once

// Scenario files, replay-buffer files and report emission (JSON / CSV).

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slqr/analysis.hpp"
#include "slqr/offpolicy.hpp"
#include "slqr/orchestrator.hpp"

namespace slqr::io {

using json = nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kBufferSchemaVersion = 1;
inline constexpr int kConvergenceCsvVersion = 1;
inline constexpr int kTrajectoryCsvVersion = 1;

/// Decimal with 15 significant digits; non-finite values print as nan/inf.
std::string formatNumber(double v);
/// v rounded to 15 significant digits (report values).
double round15(double v);

/// Row-major nested arrays. `exact` keeps every bit (buffer files); otherwise
/// entries are rounded to 15 significant digits.
json matrixToJson(const Mat& M, bool exact = false);
json vectorToJson(const Vec& v, bool exact = false);
Mat matrixFromJson(const json& j, const std::string& what);
Vec vectorFromJson(const json& j, const std::string& what);

// ---- Scenarios ------------------------------------------------------------

SharedScenario scenarioFromJson(const json& j);
json scenarioToJson(const SharedScenario& s);
SharedScenario loadScenario(const std::filesystem::path& path);

/// Model-based Riccati problem for the `care` subcommand.
struct CareProblem {
  Mat A;
  Mat B;
  Mat Q;
  Mat R;
  /// Empty: pick a stabilizing start automatically.
  std::optional<Mat> K0;
};

/// Accepts {A, B, Q, R, K0?} or a full scenario; with `"target": "shared"`
/// the human-augmented problem (A_h, Q_h) is built from a full scenario.
CareProblem careProblemFromJson(const json& j);

/// Known keys: tau, amplitude (number or "adaptive"), relative_amplitude,
/// hold_duration, tolerance, max_iterations, substeps, kappa_max (alias
/// kappaMax), oversampling. Unknown keys throw ConfigError.
void applyOverride(SharedScenario& s, const std::string& assignment);

json readJsonFile(const std::filesystem::path& path);
void writeJsonFile(const std::filesystem::path& path, const json& j);

// ---- Replay buffer ---------------------------------------------------------

json replayBufferToJson(const ReplayBuffer& buffer);
ReplayBuffer replayBufferFromJson(const json& j);

// ---- Reports ---------------------------------------------------------------

/// iteration,delta_p,error_to_oracle,relative_error,condition_number,rank,
/// segments_used,fresh_segments
void writeConvergenceCsv(std::ostream& os, const ConvergenceReport& report, const Mat& oracleP);
/// t,x1..xn,u_h,u_a (indexed u_h1.., u_a1.. when m > 1)
void writeTrajectoryCsv(std::ostream& os, const TrajectoryLog& log, Index n, Index m);

json eigenvaluesToJson(const Eigen::VectorXcd& ev);
json areTargetToJson(const AreTarget& t);
json experimentToJson(const ExperimentReport& r, double tolerance);
json postExitToJson(const PostExitReport& r);

json rankReportToJson(const RankReport& r);
json theorem1aToJson(const Theorem1AResult& r);
json theorem1bToJson(const Theorem1BResult& r);
json lemma4ToJson(const Lemma4Result& r);
json theorem2ToJson(const Theorem2Result& r);

}  // namespace slqr::io
