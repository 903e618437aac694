#include "slqr/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "slqr/errors.hpp"
#include "slqr/offpolicy.hpp"
#include "slqr/orchestrator.hpp"
#include "slqr/regression.hpp"
#include "slqr/simulation.hpp"

namespace slqr {

namespace {

Mat randomMatrix(NudgeGenerator& rng, Index rows, Index cols, double scale = 1.0) {
  Mat M(rows, cols);
  for (Index j = 0; j < cols; ++j) M.col(j) = rng.draw(rows, scale);
  return M;
}

std::vector<Vec> randomUnitStarts(NudgeGenerator& rng, Index n, int count) {
  std::vector<Vec> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    Vec v = rng.draw(n, 1.0);
    if (v.norm() < 1e-3) continue;
    out.push_back(v.normalized());
  }
  return out;
}

RankReport rankOf(const Mat& rows) {
  RankReport r;
  r.rows = rows.rows();
  r.N = rows.cols();
  Eigen::JacobiSVD<Mat> svd(rows);
  r.singularValues = svd.singularValues();
  r.numericalRank = numericalRank(rows);
  return r;
}

void requireSegmentsFromFeedback(const std::vector<SegmentRecord>& segments, Index n) {
  if (segments.empty()) throw ConfigError("analysis: no test segments");
  for (const auto& s : segments)
    if (s.stateDim() != n) throw DimensionError("analysis: segment state dimension mismatch");
}

}  // namespace

std::vector<SegmentRecord> generateTestSegments(const AnalysisProblem& problem, const Mat& F,
                                                const std::vector<Vec>& starts, double tau,
                                                int substeps) {
  const LtiPlant plant(problem.A, problem.B);
  const Index m = plant.inputDim();
  CostWeights w{problem.Q, Mat::Zero(m, m), problem.R, tau};
  SegmentOptions opts;
  opts.substeps = substeps;
  std::vector<SegmentRecord> out;
  out.reserve(starts.size());
  for (const Vec& x0 : starts) out.push_back(simulateSegment(plant, nullptr, F, x0, w, opts));
  return out;
}

Mat policyValue(const AnalysisProblem& problem, const Mat& Ki) {
  const Mat Acl = problem.A + problem.B * Ki;
  return solveLyapunov(Acl, problem.Q + Ki.transpose() * problem.R * Ki);
}

double residualBFree(const SolutionPair& pair, const Mat& Ki, const Mat& F,
                    const AnalysisProblem& problem, const std::vector<SegmentRecord>& segments) {
  requireSegmentsFromFeedback(segments, problem.A.rows());
  const Mat L = F - Ki;
  const Mat cross = symmetrize(2.0 * L.transpose() * problem.R * pair.Khat);
  const Mat reward = problem.Q + Ki.transpose() * problem.R * Ki;
  const WeightVector W = weightsFromMatrix(pair.Phat);
  double worst = 0.0;
  for (const auto& s : segments) {
    const double res = W.w.dot(s.phiDifference()) + s.quadraticIntegral(cross) + s.quadraticIntegral(reward);
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

double algebraicResidual(const SolutionPair& pair, const Mat& Ki, const Mat& F,
                             const AnalysisProblem& problem) {
  const Mat AF = problem.A + problem.B * F;
  const Mat L = F - Ki;
  const Mat& P = pair.Phat;
  const Mat& K = pair.Khat;
  const Mat res = AF.transpose() * P + P * AF + L.transpose() * problem.R * K +
                  K.transpose() * problem.R * L + Ki.transpose() * problem.R * Ki + problem.Q;
  return res.norm();
}

double residualBAware(const Mat& P, const Mat& Ki, const Mat& F, const AnalysisProblem& problem,
                    const std::vector<SegmentRecord>& segments) {
  requireSegmentsFromFeedback(segments, problem.A.rows());
  const Mat L = F - Ki;
  const Mat cross = symmetrize(2.0 * L.transpose() * problem.B.transpose() * P);
  const Mat reward = problem.Q + Ki.transpose() * problem.R * Ki;
  const WeightVector W = weightsFromMatrix(symmetrize(P));
  double worst = 0.0;
  for (const auto& s : segments) {
    const double res = W.w.dot(s.phiDifference()) - s.quadraticIntegral(cross) + s.quadraticIntegral(reward);
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

bool hasMirroredEigenvalue(const Mat& AF, double tol) {
  const Eigen::VectorXcd ev = eigenvalues(AF);
  for (Index i = 0; i < ev.size(); ++i)
    for (Index j = i; j < ev.size(); ++j)
      if (std::abs(ev(i) + ev(j)) <= tol) return true;
  return false;
}

AlternativePair constructAlternativePair(const AnalysisProblem& problem, const Mat& Ki, const Mat& F) {
  const Index n = problem.A.rows();
  const Mat AK = problem.A + problem.B * Ki;
  if (!isHurwitz(AK)) throw NotStabilizingError("constructAlternativePair: K_i is not stabilizing");
  const Mat Pi = policyValue(problem, Ki);
  const Mat Rinv_Bt = problem.R.fullPivLu().solve(problem.B.transpose());

  AlternativePair out;
  out.kleinmanPair.Phat = Pi;
  out.kleinmanPair.Khat = -Rinv_Bt * Pi;

  const Mat AF = problem.A + problem.B * F;
  const double mirrorTol = 1e-8 * std::max(1.0, AF.norm());
  Eigen::EigenSolver<Mat> es(AF.transpose());
  const Eigen::VectorXcd ev = es.eigenvalues();
  Index bi = -1, bj = -1;
  double best = mirrorTol;
  for (Index i = 0; i < ev.size(); ++i)
    for (Index j = i; j < ev.size(); ++j)
      if (std::abs(ev(i) + ev(j)) <= best) {
        best = std::abs(ev(i) + ev(j));
        bi = i;
        bj = j;
      }

  if (bi >= 0) {
    // v w^T with A_F^T v = lambda v, A_F^T w = -lambda w lies in the kernel
    // of X -> A_F^T X + X A_F, and so does its transpose.
    out.eigenCase = EigenvalueCase::CommonEigenvalue;
    const Eigen::VectorXcd v = es.eigenvectors().col(bi);
    const Eigen::VectorXcd w = es.eigenvectors().col(bj);
    const Eigen::MatrixXcd C = v * w.transpose() + w * v.transpose();
    Mat D = C.real();
    if (D.norm() < 1e-12 * C.norm()) D = C.imag();
    D = symmetrize(D);
    if (D.norm() == 0.0) throw NumericalError("constructAlternativePair: degenerate kernel element");
    D *= std::max(Pi.norm(), 1.0) / D.norm();
    out.pair.Phat = Pi + D;
    out.pair.Khat = out.kleinmanPair.Khat;
  } else {
    out.eigenCase = EigenvalueCase::NoCommonEigenvalue;
    const Mat W1 = -(Ki.transpose() * problem.R * Ki) - problem.Q;
    const SylvesterSolution s = solveSylvester(AF.transpose(), AF, W1);
    out.pair.Phat = symmetrize(s.X);
    out.pair.Khat = Mat::Zero(problem.B.cols(), n);
  }
  out.pair.residualAlgebraic = algebraicResidual(out.pair, Ki, F, problem);
  out.kleinmanPair.residualAlgebraic = algebraicResidual(out.kleinmanPair, Ki, F, problem);
  out.relativeDifference = (out.pair.Phat - Pi).norm() / std::max(Pi.norm(), 1e-300);
  out.coincides = out.relativeDifference < 1e-3;
  return out;
}

DataSolve solveBAwareFromData(const AnalysisProblem& problem, const Mat& Ki,
                            const std::vector<SegmentRecord>& segments) {
  requireSegmentsFromFeedback(segments, problem.A.rows());
  const Index n = problem.A.rows();
  const Index m = problem.B.cols();
  LearnerKnowledge k{problem.B, problem.Q, Mat::Zero(m, m), problem.R, segments.front().tau};
  ReplayBuffer buffer(n, m, k.tau, 100);
  for (const auto& s : segments) buffer.append(s);
  const RegressionSystem sys =
      recomputeRows(buffer, TargetPolicy::matrix(Ki), k, OffPolicyTarget::MinimumIntervention);
  DataSolve out;
  out.P = matrixFromWeights(solveWeights(sys));
  out.rank = sys.numericalRank();
  out.conditionNumber = sys.conditionNumber();
  return out;
}

Mat regressionRows(const Mat& Acl, const std::vector<Vec>& starts, double tau) {
  const Index n = Acl.rows();
  const Mat E = expmAt(Acl, tau);
  Mat rows(static_cast<Index>(starts.size()), triangularSize(n));
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (starts[k].size() != n) throw DimensionError("regressionRows: start state dimension");
    rows.row(static_cast<Index>(k)) =
        (quadraticFeatures(E * starts[k]) - quadraticFeatures(starts[k])).transpose();
  }
  return rows;
}

DegenerateSpectrum inspectSpectrum(const Mat& A) {
  DegenerateSpectrum d;
  Eigen::EigenSolver<Mat> es(A);
  const Eigen::VectorXcd ev = es.eigenvalues();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(es.eigenvectors());
  const auto& s = svd.singularValues();
  d.eigenvectorCondition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1)
                                                 : std::numeric_limits<double>::infinity();
  d.diagonalizable = d.eigenvectorCondition < 1e8;
  const double tol = 1e-8 * std::max(1.0, A.norm());
  for (Index i = 0; i < ev.size(); ++i)
    for (Index j = i + 1; j < ev.size(); ++j)
      if (std::abs(ev(i) - ev(j)) <= tol) d.repeatedEigenvalue = true;
  return d;
}

RankReport singleTrajectoryRank(const Mat& Acl, const Vec& x0, int segmentCount, double tau,
                                bool enforceHypothesis) {
  if (segmentCount < 1) throw ConfigError("singleTrajectoryRank: segmentCount must be >= 1");
  const DegenerateSpectrum spec = inspectSpectrum(Acl);
  if (enforceHypothesis && !spec.holds())
    throw ConfigError("singleTrajectoryRank: closed loop must be diagonalizable with a repeated eigenvalue");
  const Mat E = expmAt(Acl, tau);
  std::vector<Vec> starts;
  Vec x = x0;
  for (int k = 0; k < segmentCount; ++k) {
    starts.push_back(x);
    x = E * x;
  }
  RankReport r = rankOf(regressionRows(Acl, starts, tau));
  r.distinctTrajectoryCount = 1;
  r.hypothesisHolds = spec.holds();
  if (!spec.holds()) r.note = "outside hypothesis (needs a diagonalizable closed loop with a repeated eigenvalue)";
  return r;
}

bool onSameOrbit(const Mat& Acl, const Vec& xi, const Vec& xj, double horizon, int gridPoints,
                 double tol) {
  const int half = std::max(1, gridPoints / 2);
  const double dt = horizon / half;
  const Mat Ef = expmAt(Acl, dt);
  const Mat Eb = expmAt(Acl, -dt);
  const double scale = std::max(xj.norm(), 1e-300);
  if ((xi - xj).norm() <= tol * scale) return true;
  Vec fwd = xi, bwd = xi;
  for (int k = 0; k < half; ++k) {
    fwd = Ef * fwd;
    bwd = Eb * bwd;
    if ((fwd - xj).norm() <= tol * scale || (bwd - xj).norm() <= tol * scale) return true;
  }
  return false;
}

RankReport trajectoryRank(const Mat& Acl, const std::vector<Vec>& starts, double tau) {
  RankReport r = rankOf(regressionRows(Acl, starts, tau));
  int distinct = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    bool fresh = true;
    for (std::size_t j = 0; j < i && fresh; ++j)
      if (onSameOrbit(Acl, starts[j], starts[i])) fresh = false;
    if (fresh) ++distinct;
  }
  r.distinctTrajectoryCount = distinct;
  return r;
}

RankReport distinctTrajectoryNecessity(const Mat& Acl, int trajectoryCount, double tau,
                                       std::uint64_t seed, int maxDraws) {
  if (trajectoryCount < 1) throw ConfigError("distinctTrajectoryNecessity: need at least one trajectory");
  const Index n = Acl.rows();
  const Index N = triangularSize(n);
  NudgeGenerator rng(seed);
  RankReport r;
  for (int draw = 1; draw <= std::max(1, maxDraws); ++draw) {
    std::vector<Vec> starts;
    while (static_cast<int>(starts.size()) < trajectoryCount) {
      const Vec cand = randomUnitStarts(rng, n, 1).front();
      bool distinct = true;
      for (const Vec& s : starts)
        if (onSameOrbit(Acl, s, cand)) distinct = false;
      if (distinct) starts.push_back(cand);
    }
    r = trajectoryRank(Acl, starts, tau);
    r.draws = draw;
    if (trajectoryCount < N || r.numericalRank == N) break;
  }
  return r;
}

Theorem1AResult theorem1aDemo(int trials, std::uint64_t seed, double tolerance) {
  Theorem1AResult out;
  NudgeGenerator rng(seed);
  const Index n = 3, m = 1;
  const Index N = triangularSize(n);
  while (static_cast<int>(out.trials.size()) < trials) {
    AnalysisProblem p{randomMatrix(rng, n, n), randomMatrix(rng, n, m), Mat::Identity(n, n),
                      Mat::Identity(m, m)};
    if (!isStabilizable(p.A, p.B) || numericalRank(p.B) < m) continue;
    Mat Ki;
    try {
      // A moderate, non-optimal stabilizing gain: the LQR gain, perturbed.
      Ki = kleinmanCare(p.A, p.B, p.Q, p.R, bassStabilizingGain(p.A, p.B)).K;
    } catch (const Error&) {
      continue;
    }
    Ki += randomMatrix(rng, m, n, 0.1);
    if (spectralAbscissa(p.A + p.B * Ki) > -0.1) continue;
    const Mat Pi = policyValue(p, Ki);
    const Mat F1 = Ki + randomMatrix(rng, m, n, 0.5);
    const Mat F2 = randomMatrix(rng, m, n, 1.0);
    Theorem1ATrial t;
    Mat PF[2];
    const Mat* Fs[2] = {&F1, &F2};
    for (int k = 0; k < 2; ++k) {
      const auto segs = generateTestSegments(p, *Fs[k], randomUnitStarts(rng, n, 4 * static_cast<int>(N)), 0.5);
      const DataSolve s = solveBAwareFromData(p, Ki, segs);
      PF[k] = s.P;
      t.rank = std::min(k == 0 ? s.rank : t.rank, s.rank);
      t.maxRelativeError = std::max(t.maxRelativeError, (s.P - Pi).norm() / Pi.norm());
    }
    t.crossBehaviorSpread = (PF[0] - PF[1]).norm() / Pi.norm();
    out.worstError = std::max(out.worstError, t.maxRelativeError);
    out.worstSpread = std::max(out.worstSpread, t.crossBehaviorSpread);
    out.trials.push_back(t);
  }
  out.passed = out.worstError <= tolerance && out.worstSpread <= tolerance;
  return out;
}

Theorem1BResult theorem1bDemo(double residualTol) {
  const SharedScenario sc = carFollowingScenario();
  const AnalysisProblem p{sc.plant.A, sc.plant.B, sc.weights.Q, sc.weights.R};
  const Mat Ki = sc.human.effectiveGain();
  const Index n = p.A.rows();
  NudgeGenerator rng(11);
  const std::vector<Vec> starts = randomUnitStarts(rng, n, 8);

  struct Spec {
    const char* label;
    Mat F;
  };
  Mat Fno = Ki;
  Fno(0, 2) -= 1.0;
  const std::vector<Spec> specs = {{"F = 0 (A_F shares an eigenvalue with -A_F)", Mat::Zero(1, n)},
                                   {"F = K_i - e_3^T (no shared eigenvalue)", Fno},
                                   {"F = K_i", Ki}};
  Theorem1BResult out;
  bool ok = true;
  for (const auto& s : specs) {
    Theorem1BCase c;
    c.label = s.label;
    c.alt = constructAlternativePair(p, Ki, s.F);
    const auto segs = generateTestSegments(p, s.F, starts, sc.weights.tau);
    c.alt.pair.residualIntegral = residualBFree(c.alt.pair, Ki, s.F, p, segs);
    c.alt.kleinmanPair.residualIntegral = residualBFree(c.alt.kleinmanPair, Ki, s.F, p, segs);
    c.residualKleinman = c.alt.kleinmanPair.residualIntegral;
    const bool expectCoincide = s.F.isApprox(Ki);
    if (expectCoincide) {
      ok = ok && c.alt.coincides;
    } else {
      ok = ok && !c.alt.coincides && c.alt.pair.residualIntegral <= residualTol &&
           c.alt.relativeDifference >= 1e-3;
    }
    out.cases.push_back(std::move(c));
  }
  out.passed = ok;
  return out;
}

Mat lemma4Plant() {
  Vec d(3);
  d << -1.0, -1.0, -2.0;
  return d.asDiagonal();
}

Lemma4Result lemma4Demo(const Mat& Acl, int trials, std::uint64_t seed) {
  Lemma4Result out;
  NudgeGenerator rng(seed);
  const Index n = Acl.rows();
  const Index N = triangularSize(n);
  bool ok = true;
  for (int t = 0; t < trials; ++t) {
    const Vec x0 = randomUnitStarts(rng, n, 1).front();
    RankReport r = singleTrajectoryRank(Acl, x0, 2 * static_cast<int>(N), 0.1);
    out.maxRank = std::max(out.maxRank, r.numericalRank);
    ok = ok && r.numericalRank < N;
    out.draws.push_back(std::move(r));
  }
  out.passed = ok;
  return out;
}

Theorem2Result theorem2Demo(std::uint64_t seed, int maxDraws) {
  const SharedScenario sc = carFollowingScenario();
  const Mat Ah = sc.plant.A + sc.plant.B * sc.human.effectiveGain();
  const Index N = triangularSize(Ah.rows());
  Theorem2Result out;
  out.eigenvalues = eigenvalues(Ah);
  out.spectrum = inspectSpectrum(Ah);
  bool ok = true;
  for (Index T = 1; T <= N; ++T) {
    RankReport r = distinctTrajectoryNecessity(Ah, static_cast<int>(T), sc.weights.tau, seed + T, maxDraws);
    ok = ok && r.numericalRank <= T && r.distinctTrajectoryCount == T;
    if (T == N) ok = ok && r.numericalRank == N;
    out.reports.push_back(std::move(r));
  }
  out.passed = ok;
  return out;
}

}  // namespace slqr
