#pragma once

// Executable checks of the solvability results for integral policy
// iteration: uniqueness of the B-aware off-policy equation, non-uniqueness
// of the B-free one, and rank of regression data collected along one or
// several trajectories.

#include <cstdint>
#include <string>
#include <vector>

#include "slqr/linalg.hpp"
#include "slqr/segment.hpp"

namespace slqr {

/// Ground-truth linear-quadratic problem on the analysis side.
struct AnalysisProblem {
  Mat A;
  Mat B;
  Mat Q;
  Mat R;
};

/// Segments of length tau driven by u = F x from each start state.
std::vector<SegmentRecord> generateTestSegments(const AnalysisProblem& problem, const Mat& F,
                                                const std::vector<Vec>& starts, double tau,
                                                int substeps = 100);

/// P_i of the policy K_i: solves (A + B K_i)-Lyapunov with Q + K_i^T R K_i.
Mat policyValue(const AnalysisProblem& problem, const Mat& Ki);

struct SolutionPair {
  Mat Phat;
  Mat Khat;
  /// Max |residual| of the B-free integral equation over the test segments.
  double residualIntegral = 0.0;
  /// Frobenius residual of its algebraic (first Taylor coefficient) form.
  double residualAlgebraic = 0.0;
};

/// B-free equation: V(x_end) - V(x_start) + 2 int Delta^T R Khat x dt
/// + int x^T (Q + K_i^T R K_i) x dt, maximized in magnitude over segments.
double residualBFree(const SolutionPair& pair, const Mat& Ki, const Mat& F,
                    const AnalysisProblem& problem, const std::vector<SegmentRecord>& segments);

/// (A+BF)^T P + P (A+BF) + L^T R K + K^T R L + K_i^T R K_i + Q, L = F - K_i.
double algebraicResidual(const SolutionPair& pair, const Mat& Ki, const Mat& F,
                             const AnalysisProblem& problem);

/// B-aware equation: V(x_end) - V(x_start) - int Delta^T B^T 2 P x dt
/// + int x^T (Q + K_i^T R K_i) x dt, maximized in magnitude over segments.
double residualBAware(const Mat& P, const Mat& Ki, const Mat& F, const AnalysisProblem& problem,
                    const std::vector<SegmentRecord>& segments);

enum class EigenvalueCase { CommonEigenvalue, NoCommonEigenvalue };

struct AlternativePair {
  SolutionPair pair;
  SolutionPair kleinmanPair;  // {P_i, -R^-1 B^T P_i}
  EigenvalueCase eigenCase = EigenvalueCase::NoCommonEigenvalue;
  /// ||Phat - P_i||_F / ||P_i||_F
  double relativeDifference = 0.0;
  /// The construction reproduced P_i (e.g. F == K_i).
  bool coincides = false;
};

/// True when A_F and -A_F share an eigenvalue (|lambda_i + lambda_j| <= tol).
bool hasMirroredEigenvalue(const Mat& AF, double tol = 1e-8);

/// Builds a solution pair of the B-free equation other than the Kleinman
/// pair. Requires A + B K_i Hurwitz.
AlternativePair constructAlternativePair(const AnalysisProblem& problem, const Mat& Ki, const Mat& F);

struct DataSolve {
  Mat P;
  Index rank = 0;
  double conditionNumber = 0.0;
};

/// Solves the B-aware regression (known B, delta rows) from segments
/// generated under u = F x. Throws CollinearityError on rank deficiency.
DataSolve solveBAwareFromData(const AnalysisProblem& problem, const Mat& Ki,
                            const std::vector<SegmentRecord>& segments);

struct RankReport {
  Index numericalRank = 0;
  Vec singularValues;
  Index N = 0;
  Index rows = 0;
  int distinctTrajectoryCount = 0;
  int draws = 1;
  bool hypothesisHolds = true;
  std::string note;
};

/// Rows phi(x(t_k + tau)) - phi(x(t_k)) stacked from the given start states
/// under xdot = Acl x (exact flow).
Mat regressionRows(const Mat& Acl, const std::vector<Vec>& starts, double tau);

struct DegenerateSpectrum {
  bool diagonalizable = false;
  bool repeatedEigenvalue = false;
  double eigenvectorCondition = 0.0;
  bool holds() const { return diagonalizable && repeatedEigenvalue; }
};
DegenerateSpectrum inspectSpectrum(const Mat& A);

/// Rank of regression data taken from consecutive windows along the single
/// trajectory x(t) = e^{Acl t} x0. With `enforceHypothesis` a spectrum that is
/// not diagonalizable-with-a-repeated-eigenvalue throws ConfigError.
RankReport singleTrajectoryRank(const Mat& Acl, const Vec& x0, int segmentCount, double tau,
                                bool enforceHypothesis = true);

/// True when xj lies on the orbit of xi: xj ~ e^{Acl t} xi for some t on a
/// grid over [-horizon, horizon].
bool onSameOrbit(const Mat& Acl, const Vec& xi, const Vec& xj, double horizon = 5.0,
                 int gridPoints = 2001, double tol = 1e-8);

/// Rank of one-window-per-trajectory data from the given starts.
RankReport trajectoryRank(const Mat& Acl, const std::vector<Vec>& starts, double tau);

/// Draws `trajectoryCount` pairwise-distinct random starts and reports the
/// rank; when trajectoryCount >= N and full rank is missed, redraws up to
/// `maxDraws` times.
RankReport distinctTrajectoryNecessity(const Mat& Acl, int trajectoryCount, double tau,
                                       std::uint64_t seed, int maxDraws = 5);

// ---- Demonstrations --------------------------------------------------------

struct Theorem1ATrial {
  double maxRelativeError = 0.0;    // max over behaviors of ||P_F - P_i|| / ||P_i||
  double crossBehaviorSpread = 0.0; // ||P_F1 - P_F2|| / ||P_i||
  Index rank = 0;
};
struct Theorem1AResult {
  std::vector<Theorem1ATrial> trials;
  double worstError = 0.0;
  double worstSpread = 0.0;
  bool passed = false;
};
Theorem1AResult theorem1aDemo(int trials, std::uint64_t seed, double tolerance = 1e-6);

struct Theorem1BCase {
  std::string label;
  AlternativePair alt;
  double residualKleinman = 0.0;
};
struct Theorem1BResult {
  std::vector<Theorem1BCase> cases;
  bool passed = false;
};
Theorem1BResult theorem1bDemo(double residualTol = 1e-8);

struct Lemma4Result {
  std::vector<RankReport> draws;
  Index maxRank = 0;
  bool passed = false;
};
/// diag(-1, -1, -2): diagonalizable with a repeated eigenvalue.
Mat lemma4Plant();
Lemma4Result lemma4Demo(const Mat& Acl, int trials, std::uint64_t seed);

struct Theorem2Result {
  std::vector<RankReport> reports;  // T = 1 .. N
  Eigen::VectorXcd eigenvalues;     // of A_h
  DegenerateSpectrum spectrum;
  bool passed = false;
};
Theorem2Result theorem2Demo(std::uint64_t seed, int maxDraws = 5);

}  // namespace slqr
