#include "slqr/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "slqr/errors.hpp"

namespace slqr::io {

std::string formatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

double round15(double v) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return std::strtod(buf, nullptr);
}

namespace {

json number(double v, bool exact = false) {
  if (!std::isfinite(v)) return nullptr;
  return exact ? v : round15(v);
}

void requireKeys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double getNumber(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

int getInt(const json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_number_integer()) throw ConfigError(where + ": '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

double parseDouble(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError("override " + key + ": not a number: '" + text + "'");
  return v;
}

int parseInt(const std::string& key, const std::string& text) {
  const double v = parseDouble(key, text);
  if (v != std::floor(v)) throw ConfigError("override " + key + ": not an integer: '" + text + "'");
  return static_cast<int>(v);
}

void checkVersion(const json& j, int expected, const std::string& where) {
  if (!j.contains("schema_version")) throw ConfigError(where + ": missing schema_version");
  const int v = getInt(j, "schema_version", where);
  if (v != expected) {
    std::ostringstream os;
    os << where << ": unsupported schema_version " << v << " (expected " << expected << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace

json matrixToJson(const Mat& M, bool exact) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(number(M(i, j), exact));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vectorToJson(const Vec& v, bool exact) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i), exact));
  return out;
}

Mat matrixFromJson(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  if (!j.front().is_array() || j.front().empty()) throw ConfigError(what + ": rows must be non-empty arrays");
  const auto cols = static_cast<Index>(j.front().size());
  Mat M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ConfigError(what + ": ragged matrix rows");
    for (Index c = 0; c < cols; ++c) {
      const json& e = row.at(static_cast<std::size_t>(c));
      if (!e.is_number()) throw ConfigError(what + ": non-numeric entry");
      M(i, c) = e.get<double>();
    }
  }
  return M;
}

Vec vectorFromJson(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

// ---- Scenarios ------------------------------------------------------------

SharedScenario scenarioFromJson(const json& j) {
  const std::string where = "scenario";
  requireKeys(j, {"schema_version", "A", "B", "human", "Q", "M", "R", "tau", "mode", "x0", "seed",
                  "nudge", "learner", "target", "K0"},
              where);
  checkVersion(j, kScenarioSchemaVersion, where);
  for (const char* key : {"A", "B", "human", "Q", "M", "R", "x0"})
    if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");

  SharedScenario s;
  s.plant = LtiPlant(matrixFromJson(j.at("A"), "A"), matrixFromJson(j.at("B"), "B"));
  const json& h = j.at("human");
  requireKeys(h, {"Kh", "Ch"}, "human");
  if (!h.contains("Kh") || !h.contains("Ch")) throw ConfigError("human: needs Kh and Ch");
  s.human = HumanPolicy{matrixFromJson(h.at("Kh"), "human.Kh"), matrixFromJson(h.at("Ch"), "human.Ch")};
  s.weights.Q = matrixFromJson(j.at("Q"), "Q");
  s.weights.M = matrixFromJson(j.at("M"), "M");
  s.weights.R = matrixFromJson(j.at("R"), "R");
  if (j.contains("tau")) s.weights.tau = getNumber(j, "tau", where);
  if (j.contains("mode")) s.mode = learningModeFromString(j.at("mode").get<std::string>());
  s.x0 = vectorFromJson(j.at("x0"), "x0");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("scenario: seed must be a non-negative integer");
    s.nudge.seed = j.at("seed").get<std::uint64_t>();
  }

  if (j.contains("nudge")) {
    const json& n = j.at("nudge");
    requireKeys(n, {"amplitude", "relative_amplitude", "amplitude_floor", "hold_duration", "teleport"}, "nudge");
    if (n.contains("amplitude")) {
      const json& a = n.at("amplitude");
      if (a.is_number()) s.nudge.amplitude = a.get<double>();
      else if (!(a.is_null() || (a.is_string() && a.get<std::string>() == "adaptive")))
        throw ConfigError("nudge.amplitude: number, null or \"adaptive\"");
    }
    if (n.contains("relative_amplitude")) s.nudge.relativeAmplitude = getNumber(n, "relative_amplitude", "nudge");
    if (n.contains("amplitude_floor")) s.nudge.amplitudeFloor = getNumber(n, "amplitude_floor", "nudge");
    if (n.contains("hold_duration")) s.nudge.holdDuration = getNumber(n, "hold_duration", "nudge");
    if (n.contains("teleport")) s.nudge.teleport = n.at("teleport").get<bool>();
  }

  if (j.contains("learner")) {
    const json& l = j.at("learner");
    requireKeys(l, {"tolerance", "max_iterations", "kappa_max", "oversampling", "segments_per_trajectory",
                    "substeps", "max_segments_per_iteration"},
                "learner");
    if (l.contains("tolerance")) s.learner.stop.relTol = getNumber(l, "tolerance", "learner");
    if (l.contains("max_iterations")) s.learner.stop.maxIterations = getInt(l, "max_iterations", "learner");
    if (l.contains("kappa_max")) s.learner.kappaMax = getNumber(l, "kappa_max", "learner");
    if (l.contains("oversampling")) s.learner.oversampling = getNumber(l, "oversampling", "learner");
    if (l.contains("segments_per_trajectory"))
      s.learner.segmentsPerTrajectory = getInt(l, "segments_per_trajectory", "learner");
    if (l.contains("substeps")) s.learner.substeps = getInt(l, "substeps", "learner");
    if (l.contains("max_segments_per_iteration"))
      s.learner.maxSegmentsPerIteration = getInt(l, "max_segments_per_iteration", "learner");
  }
  s.validate();
  return s;
}

json scenarioToJson(const SharedScenario& s) {
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["A"] = matrixToJson(s.plant.A, true);
  j["B"] = matrixToJson(s.plant.B, true);
  j["human"] = {{"Kh", matrixToJson(s.human.Kh, true)}, {"Ch", matrixToJson(s.human.Ch, true)}};
  j["Q"] = matrixToJson(s.weights.Q, true);
  j["M"] = matrixToJson(s.weights.M, true);
  j["R"] = matrixToJson(s.weights.R, true);
  j["tau"] = s.weights.tau;
  j["mode"] = toString(s.mode);
  j["x0"] = vectorToJson(s.x0, true);
  j["seed"] = s.nudge.seed;
  j["nudge"] = {{"amplitude", s.nudge.amplitude ? json(*s.nudge.amplitude) : json("adaptive")},
                {"relative_amplitude", s.nudge.relativeAmplitude},
                {"amplitude_floor", s.nudge.amplitudeFloor},
                {"hold_duration", s.nudge.holdDuration},
                {"teleport", s.nudge.teleport}};
  j["learner"] = {{"tolerance", s.learner.stop.relTol},
                  {"max_iterations", s.learner.stop.maxIterations},
                  {"kappa_max", s.learner.kappaMax},
                  {"oversampling", s.learner.oversampling},
                  {"segments_per_trajectory", s.learner.segmentsPerTrajectory},
                  {"substeps", s.learner.substeps},
                  {"max_segments_per_iteration", s.learner.maxSegmentsPerIteration}};
  return j;
}

json readJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void writeJsonFile(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SharedScenario loadScenario(const std::filesystem::path& path) {
  return scenarioFromJson(readJsonFile(path));
}

CareProblem careProblemFromJson(const json& j) {
  CareProblem p;
  const std::string target = j.contains("target") ? j.at("target").get<std::string>() : "plain";
  if (target == "shared") {
    const SharedScenario s = scenarioFromJson(j);
    const Mat Keff = s.human.effectiveGain();
    p.A = s.plant.A + s.plant.B * Keff;
    p.B = s.plant.B;
    p.Q = s.weights.Q + Keff.transpose() * s.weights.M * Keff;
    p.R = s.weights.R;
  } else if (target == "plain") {
    if (j.contains("human")) {
      (void)scenarioFromJson(j);  // full scenario: validate every key
    } else {
      requireKeys(j, {"schema_version", "A", "B", "Q", "R", "K0", "target"}, "care problem");
      checkVersion(j, kScenarioSchemaVersion, "care problem");
    }
    for (const char* key : {"A", "B", "Q", "R"})
      if (!j.contains(key)) throw ConfigError(std::string("care problem: missing '") + key + "'");
    p.A = matrixFromJson(j.at("A"), "A");
    p.B = matrixFromJson(j.at("B"), "B");
    p.Q = matrixFromJson(j.at("Q"), "Q");
    p.R = matrixFromJson(j.at("R"), "R");
  } else {
    throw ConfigError("care problem: target must be \"plain\" or \"shared\"");
  }
  if (j.contains("K0") && !(j.at("K0").is_string() && j.at("K0").get<std::string>() == "auto"))
    p.K0 = matrixFromJson(j.at("K0"), "K0");
  return p;
}

void applyOverride(SharedScenario& s, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like KEY=VALUE: '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  if (key == "tau") {
    s.weights.tau = parseDouble(key, value);
  } else if (key == "amplitude") {
    if (value == "adaptive") s.nudge.amplitude.reset();
    else s.nudge.amplitude = parseDouble(key, value);
  } else if (key == "relative_amplitude") {
    s.nudge.relativeAmplitude = parseDouble(key, value);
  } else if (key == "hold_duration") {
    s.nudge.holdDuration = parseDouble(key, value);
  } else if (key == "tolerance") {
    s.learner.stop.relTol = parseDouble(key, value);
  } else if (key == "max_iterations") {
    s.learner.stop.maxIterations = parseInt(key, value);
  } else if (key == "substeps") {
    s.learner.substeps = parseInt(key, value);
  } else if (key == "kappa_max" || key == "kappaMax") {
    s.learner.kappaMax = parseDouble(key, value);
  } else if (key == "oversampling") {
    s.learner.oversampling = parseDouble(key, value);
  } else {
    throw ConfigError("unknown override key '" + key + "'");
  }
  s.validate();
}

// ---- Replay buffer ---------------------------------------------------------

json replayBufferToJson(const ReplayBuffer& buffer) {
  json segs = json::array();
  for (const auto& s : buffer.segments()) {
    segs.push_back({{"t_start", s.tStart},
                    {"tau", s.tau},
                    {"x_start", vectorToJson(s.xStart, true)},
                    {"x_end", vectorToJson(s.xEnd, true)},
                    {"r_x", s.rX},
                    {"r_uh", s.rUh},
                    {"r_uh_R", s.rUhR},
                    {"r_ua_R", s.rUaR},
                    {"u_squared", s.uSquared},
                    {"moments", vectorToJson(s.moments, true)},
                    {"delta_uh", vectorToJson(s.deltaUh, true)},
                    {"delta_ua", vectorToJson(s.deltaUa, true)},
                    {"delta_basis", matrixToJson(s.deltaBasis, true)}});
  }
  return {{"schema_version", kBufferSchemaVersion},
          {"n", buffer.stateDim()},
          {"m", buffer.inputDim()},
          {"tau", buffer.tau()},
          {"substeps", buffer.substeps()},
          {"segments", std::move(segs)}};
}

ReplayBuffer replayBufferFromJson(const json& j) {
  requireKeys(j, {"schema_version", "n", "m", "tau", "substeps", "segments"}, "buffer");
  checkVersion(j, kBufferSchemaVersion, "buffer");
  ReplayBuffer buffer(getInt(j, "n", "buffer"), getInt(j, "m", "buffer"), getNumber(j, "tau", "buffer"),
                      getInt(j, "substeps", "buffer"));
  for (const json& e : j.at("segments")) {
    requireKeys(e, {"t_start", "tau", "x_start", "x_end", "r_x", "r_uh", "r_uh_R", "r_ua_R", "u_squared",
                    "moments", "delta_uh", "delta_ua", "delta_basis"},
                "buffer segment");
    SegmentRecord s;
    s.tStart = getNumber(e, "t_start", "buffer segment");
    s.tau = getNumber(e, "tau", "buffer segment");
    s.xStart = vectorFromJson(e.at("x_start"), "x_start");
    s.xEnd = vectorFromJson(e.at("x_end"), "x_end");
    s.rX = getNumber(e, "r_x", "buffer segment");
    s.rUh = getNumber(e, "r_uh", "buffer segment");
    s.rUhR = getNumber(e, "r_uh_R", "buffer segment");
    s.rUaR = getNumber(e, "r_ua_R", "buffer segment");
    s.uSquared = getNumber(e, "u_squared", "buffer segment");
    s.moments = vectorFromJson(e.at("moments"), "moments");
    s.deltaUh = vectorFromJson(e.at("delta_uh"), "delta_uh");
    s.deltaUa = vectorFromJson(e.at("delta_ua"), "delta_ua");
    s.deltaBasis = matrixFromJson(e.at("delta_basis"), "delta_basis");
    buffer.append(std::move(s));
  }
  return buffer;
}

// ---- Reports ---------------------------------------------------------------

void writeConvergenceCsv(std::ostream& os, const ConvergenceReport& report, const Mat& oracleP) {
  os << "iteration,delta_p,error_to_oracle,relative_error,condition_number,rank,segments_used,fresh_segments\n";
  const double scale = oracleP.size() ? oracleP.norm() : std::nan("");
  for (const auto& r : report.iterations) {
    os << r.iteration << ',' << formatNumber(r.deltaP) << ',' << formatNumber(r.errorToOracle) << ','
       << formatNumber(r.errorToOracle / scale) << ',' << formatNumber(r.conditionNumber) << ',' << r.rank
       << ',' << r.segmentsUsed << ',' << r.freshSegments << '\n';
  }
}

void writeTrajectoryCsv(std::ostream& os, const TrajectoryLog& log, Index n, Index m) {
  os << 't';
  for (Index i = 1; i <= n; ++i) os << ",x" << i;
  if (m == 1) {
    os << ",u_h,u_a";
  } else {
    for (Index i = 1; i <= m; ++i) os << ",u_h" << i;
    for (Index i = 1; i <= m; ++i) os << ",u_a" << i;
  }
  os << '\n';
  for (const auto& s : log.samples) {
    os << formatNumber(s.t);
    for (Index i = 0; i < n; ++i) os << ',' << formatNumber(s.x(i));
    for (Index i = 0; i < m; ++i) os << ',' << formatNumber(s.uh.size() ? s.uh(i) : 0.0);
    for (Index i = 0; i < m; ++i) os << ',' << formatNumber(s.ua.size() ? s.ua(i) : 0.0);
    os << '\n';
  }
}

json eigenvaluesToJson(const Eigen::VectorXcd& ev) {
  json out = json::array();
  for (Index i = 0; i < ev.size(); ++i) out.push_back({number(ev(i).real()), number(ev(i).imag())});
  return out;
}

json areTargetToJson(const AreTarget& t) {
  return {{"A", matrixToJson(t.Aeff)},
          {"B", matrixToJson(t.B)},
          {"Q", matrixToJson(t.Qeff)},
          {"R", matrixToJson(t.R)},
          {"P", matrixToJson(t.Pstar)},
          {"K", matrixToJson(t.Kstar)},
          {"residual", number(t.residual)},
          {"closed_loop_eigenvalues", eigenvaluesToJson(eigenvalues(t.Aeff + t.B * t.Kstar))}};
}

json experimentToJson(const ExperimentReport& r, double tolerance) {
  int fresh = 0;
  for (const auto& it : r.learning.iterations) fresh += it.freshSegments;
  const int afterFirst = r.learning.iterations.empty() ? 0 : fresh - r.learning.iterations.front().freshSegments;
  json j;
  j["mode"] = toString(r.mode);
  j["converged"] = r.learning.converged;
  j["iterations"] = r.learning.iterations.size();
  j["total_segments"] = r.learning.totalSegments;
  j["fresh_segments_after_first_iteration"] = afterFirst;
  j["learned_P"] = matrixToJson(r.learnedP);
  j["learned_K"] = matrixToJson(r.learnedK);
  j["relative_error"] = number(r.relativeError);
  j["tolerance"] = tolerance;
  j["closed_loop_eigenvalues"] = eigenvaluesToJson(r.closedLoopEigenvalues);
  j["spectral_abscissa"] = number(r.spectralAbscissa);
  j["nudges"] = r.nudges.size();
  j["passed"] = r.relativeError <= tolerance && r.spectralAbscissa < 0.0;
  return j;
}

json postExitToJson(const PostExitReport& r) {
  return {{"horizon", number(r.horizon)},
          {"final_state_ratio", number(r.finalStateRatio)},
          {"realized_cost", number(r.realizedCost)},
          {"predicted_cost", number(r.predictedCost)},
          {"relative_cost_error", number(r.relativeCostError)},
          {"stable", r.stable},
          {"passed", r.passed}};
}

json rankReportToJson(const RankReport& r) {
  json j = {{"numerical_rank", r.numericalRank},
            {"N", r.N},
            {"rows", r.rows},
            {"singular_values", vectorToJson(r.singularValues)},
            {"distinct_trajectories", r.distinctTrajectoryCount},
            {"draws", r.draws},
            {"hypothesis_holds", r.hypothesisHolds}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

json theorem1aToJson(const Theorem1AResult& r) {
  json trials = json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"max_relative_error", number(t.maxRelativeError)},
                      {"cross_behavior_spread", number(t.crossBehaviorSpread)},
                      {"rank", t.rank}});
  return {{"demo", "theorem1a"},
          {"trials", std::move(trials)},
          {"worst_error", number(r.worstError)},
          {"worst_spread", number(r.worstSpread)},
          {"passed", r.passed}};
}

namespace {
json pairToJson(const SolutionPair& p) {
  return {{"P", matrixToJson(p.Phat)},
          {"K", matrixToJson(p.Khat)},
          {"residual_integral", number(p.residualIntegral)},
          {"residual_algebraic", number(p.residualAlgebraic)}};
}
}  // namespace

json theorem1bToJson(const Theorem1BResult& r) {
  json cases = json::array();
  for (const auto& c : r.cases)
    cases.push_back({{"label", c.label},
                     {"eigenvalue_case", c.alt.eigenCase == EigenvalueCase::CommonEigenvalue ? "common" : "none"},
                     {"alternative", pairToJson(c.alt.pair)},
                     {"kleinman", pairToJson(c.alt.kleinmanPair)},
                     {"relative_difference", number(c.alt.relativeDifference)},
                     {"coincides", c.alt.coincides}});
  return {{"demo", "theorem1b"}, {"cases", std::move(cases)}, {"passed", r.passed}};
}

json lemma4ToJson(const Lemma4Result& r) {
  json draws = json::array();
  for (const auto& d : r.draws) draws.push_back(rankReportToJson(d));
  return {{"demo", "lemma4"}, {"draws", std::move(draws)}, {"max_rank", r.maxRank}, {"passed", r.passed}};
}

json theorem2ToJson(const Theorem2Result& r) {
  json reports = json::array();
  for (std::size_t k = 0; k < r.reports.size(); ++k) {
    json e = rankReportToJson(r.reports[k]);
    e["trajectories"] = k + 1;
    reports.push_back(std::move(e));
  }
  json ev = json::array();
  for (Index k = 0; k < r.eigenvalues.size(); ++k)
    ev.push_back({number(r.eigenvalues(k).real()), number(r.eigenvalues(k).imag())});
  return {{"demo", "theorem2"},
          {"reports", std::move(reports)},
          {"closed_loop_eigenvalues", std::move(ev)},
          {"eigenvector_condition", number(r.spectrum.eigenvectorCondition)},
          {"diagonalizable", r.spectrum.diagonalizable},
          {"passed", r.passed}};
}

}  // namespace slqr::io
