#include "slqr/simulation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "slqr/errors.hpp"

namespace slqr {

namespace {

// Offsets of the quadrature accumulators inside the augmented state.
struct QuadratureLayout {
  Index n, m, N;
  Index rX = 0, rUh = 1, rUhR = 2, rUaR = 3, uSq = 4;
  Index moments, deltaUh, deltaUa, basis, size;

  QuadratureLayout(Index n_, Index m_) : n(n_), m(m_), N(triangularSize(n_)) {
    moments = 5;
    deltaUh = moments + N;
    deltaUa = deltaUh + N;
    basis = deltaUa + N;
    size = basis + m * n * N;
  }
};

// grad(phi)(x) * v, i.e. the derivative of phi along direction v.
Vec gradPhiTimes(const Vec& x, const Vec& v) {
  const Index n = x.size();
  Vec out(triangularSize(n));
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) out(kappa0(i, j, n)) = x(j) * v(i) + x(i) * v(j);
  return out;
}

class LoopDynamics {
 public:
  LoopDynamics(const LtiPlant& plant, const HumanPolicy* human, const Mat& ua, const Vec& bias)
      : A_(plant.A), B_(plant.B), ua_(ua), bias_(bias) {
    const Index m = plant.inputDim();
    const Index n = plant.stateDim();
    requireShape(ua_, m, n, "autonomy gain");
    if (bias_.size() == 0) bias_ = Vec::Zero(m);
    if (bias_.size() != m) throw DimensionError("nudge input has the wrong length");
    Kh_ = human ? human->effectiveGain() : Mat::Zero(m, n);
    requireShape(Kh_, m, n, "human effective gain");
  }

  Vec uh(const Vec& x) const { return Kh_ * x; }
  Vec ua(const Vec& x) const { return ua_ * x + bias_; }
  Vec xdot(const Vec& x) const { return A_ * x + B_ * (uh(x) + ua(x)); }
  const Mat& B() const { return B_; }

 private:
  const Mat& A_;
  const Mat& B_;
  Mat ua_;
  Vec bias_;
  Mat Kh_;
};

void integrand(const LoopDynamics& dyn, const CostWeights& w, const QuadratureLayout& L,
               const Vec& x, Vec& g) {
  const Vec uh = dyn.uh(x);
  const Vec ua = dyn.ua(x);
  const Vec u = uh + ua;
  g(L.rX) = x.dot(w.Q * x);
  g(L.rUh) = uh.dot(w.M * uh);
  g(L.rUhR) = uh.dot(w.R * uh);
  g(L.rUaR) = ua.dot(w.R * ua);
  g(L.uSq) = u.squaredNorm();
  g.segment(L.moments, L.N) = quadraticFeatures(x);
  g.segment(L.deltaUh, L.N) = gradPhiTimes(x, dyn.B() * uh);
  g.segment(L.deltaUa, L.N) = gradPhiTimes(x, dyn.B() * ua);
  for (Index q = 0; q < L.n; ++q)
    for (Index p = 0; p < L.m; ++p)
      g.segment(L.basis + (q * L.m + p) * L.N, L.N) = gradPhiTimes(x, dyn.B().col(p) * x(q));
}

void logSample(TrajectoryLog* log, const LoopDynamics& dyn, double t, const Vec& x) {
  if (log) log->samples.push_back({t, x, dyn.uh(x), dyn.ua(x)});
}

void checkFinite(const Vec& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << "state became non-finite at t=" << t;
    throw SimulationError(os.str(), t);
  }
}

}  // namespace

bool isStabilizable(const Mat& A, const Mat& B) {
  const Index n = A.rows();
  const Eigen::VectorXcd lambda = eigenvalues(A);
  for (Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k).real() < 0.0) continue;
    Eigen::MatrixXcd H(n, n + B.cols());
    H.leftCols(n) = lambda(k) * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    H.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(H);
    const auto& s = svd.singularValues();
    const double thresh = static_cast<double>(H.cols()) * s(0) * 1e-12;
    Index rank = 0;
    for (Index i = 0; i < s.size(); ++i)
      if (s(i) > thresh) ++rank;
    if (rank < n) return false;
  }
  return true;
}

LtiPlant::LtiPlant(Mat A_, Mat B_) : A(std::move(A_)), B(std::move(B_)) {
  if (A.rows() != A.cols() || A.rows() < 1) throw ConfigError("plant: A must be square");
  if (B.rows() != A.rows() || B.cols() < 1) throw ConfigError("plant: B must have n rows");
  if (!A.allFinite() || !B.allFinite()) throw ConfigError("plant: non-finite entries");
  if (!isStabilizable(A, B)) throw ConfigError("plant: (A, B) is not stabilizable");
}

Vec humanInput(const HumanPolicy& human, const Vec& x) { return human.Kh * (human.Ch * x); }

void CostWeights::validate(Index n, Index m) const {
  auto symmetric = [](const Mat& S) { return (S - S.transpose()).norm() <= 1e-12 * std::max(1.0, S.norm()); };
  if (Q.rows() != n || Q.cols() != n || !symmetric(Q)) throw ConfigError("weights: Q must be symmetric n x n");
  if (M.rows() != m || M.cols() != m || !symmetric(M)) throw ConfigError("weights: M must be symmetric m x m");
  if (R.rows() != m || R.cols() != m || !symmetric(R)) throw ConfigError("weights: R must be symmetric m x m");
  Eigen::SelfAdjointEigenSolver<Mat> eq(Q), em(M), er(R);
  if (eq.eigenvalues().minCoeff() < -1e-12) throw ConfigError("weights: Q must be positive semidefinite");
  if (em.eigenvalues().minCoeff() < -1e-12) throw ConfigError("weights: M must be positive semidefinite");
  if (er.eigenvalues().minCoeff() <= 0.0) throw ConfigError("weights: R must be positive definite");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("weights: tau must be positive");
}

double NudgeGenerator::uniform() {
  // 53 random bits mapped onto [0, 1); independent of the standard
  // library's distribution implementation.
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

Vec NudgeGenerator::draw(Index m, double amplitude) {
  Vec v(m);
  for (Index i = 0; i < m; ++i) v(i) = amplitude * (2.0 * uniform() - 1.0);
  return v;
}

SegmentRecord simulateSegment(const LtiPlant& plant, const HumanPolicy* human, const Mat& ua,
                              const Vec& x0, const CostWeights& weights,
                              const SegmentOptions& options, TrajectoryLog* log) {
  const Index n = plant.stateDim();
  const Index m = plant.inputDim();
  if (x0.size() != n) throw DimensionError("simulateSegment: x0 has the wrong length");
  if (options.substeps < 10) throw ConfigError("simulateSegment: substeps must be >= 10");
  if (!(weights.tau > 0.0)) throw ConfigError("simulateSegment: tau must be positive");

  const LoopDynamics dyn(plant, human, ua, Vec());
  const QuadratureLayout L(n, m);
  const double h = weights.tau / options.substeps;

  Vec x = x0;
  Vec acc = Vec::Zero(L.size);
  Vec g1(L.size), g2(L.size), g3(L.size), g4(L.size);
  for (int s = 0; s < options.substeps; ++s) {
    const Vec k1 = dyn.xdot(x);
    const Vec x2 = x + 0.5 * h * k1;
    const Vec k2 = dyn.xdot(x2);
    const Vec x3 = x + 0.5 * h * k2;
    const Vec k3 = dyn.xdot(x3);
    const Vec x4 = x + h * k3;
    const Vec k4 = dyn.xdot(x4);
    integrand(dyn, weights, L, x, g1);
    integrand(dyn, weights, L, x2, g2);
    integrand(dyn, weights, L, x3, g3);
    integrand(dyn, weights, L, x4, g4);
    acc += (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = options.tStart + (s + 1) * h;
    checkFinite(x, t);
    logSample(log, dyn, t, x);
  }

  SegmentRecord rec;
  rec.tStart = options.tStart;
  rec.tau = weights.tau;
  rec.xStart = x0;
  rec.xEnd = x;
  rec.rX = acc(L.rX);
  rec.rUh = acc(L.rUh);
  rec.rUhR = acc(L.rUhR);
  rec.rUaR = acc(L.rUaR);
  rec.uSquared = acc(L.uSq);
  rec.moments = acc.segment(L.moments, L.N);
  rec.deltaUh = acc.segment(L.deltaUh, L.N);
  rec.deltaUa = acc.segment(L.deltaUa, L.N);
  rec.deltaBasis.resize(m * n, L.N);
  for (Index k = 0; k < m * n; ++k) rec.deltaBasis.row(k) = acc.segment(L.basis + k * L.N, L.N).transpose();
  if (!acc.allFinite()) throw SimulationError("segment integrals became non-finite", options.tStart + weights.tau);
  return rec;
}

Vec simulateHold(const LtiPlant& plant, const HumanPolicy* human, const Mat& ua, const Vec& bias,
                 const Vec& x0, double duration, double step, double tStart, TrajectoryLog* log) {
  if (!(duration >= 0.0) || !(step > 0.0)) throw ConfigError("simulateHold: invalid duration or step");
  const LoopDynamics dyn(plant, human, ua, bias);
  const int steps = static_cast<int>(std::ceil(duration / step - 1e-9));
  if (steps == 0) return x0;
  const double h = duration / steps;
  Vec x = x0;
  for (int s = 0; s < steps; ++s) {
    const Vec k1 = dyn.xdot(x);
    const Vec k2 = dyn.xdot(x + 0.5 * h * k1);
    const Vec k3 = dyn.xdot(x + 0.5 * h * k2);
    const Vec k4 = dyn.xdot(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = tStart + (s + 1) * h;
    checkFinite(x, t);
    logSample(log, dyn, t, x);
  }
  return x;
}

SharedLoopSimulator::SharedLoopSimulator(LtiPlant plant, std::optional<HumanPolicy> human,
                                         CostWeights weights, NudgeConfig nudge, Vec x0,
                                         int substeps)
    : plant_(std::move(plant)),
      human_(std::move(human)),
      weights_(std::move(weights)),
      nudge_(nudge),
      rng_(nudge.seed),
      substeps_(substeps),
      x_(std::move(x0)) {
  weights_.validate(plant_.stateDim(), plant_.inputDim());
  if (x_.size() != plant_.stateDim()) throw ConfigError("initial state has the wrong length");
  if (nudge_.amplitude && *nudge_.amplitude < 0.0) throw ConfigError("nudge amplitude must be >= 0");
  if (!(nudge_.holdDuration > 0.0)) throw ConfigError("nudge hold duration must be > 0");
  const Vec ua0 = Vec::Zero(plant_.inputDim());
  const Vec uh0 = human_ ? humanInput(*human_, x_) : ua0;
  log_.samples.push_back({0.0, x_, uh0, ua0});
}

SegmentRecord SharedLoopSimulator::exploit(const Mat& autonomyGain) {
  const HumanPolicy* h = human_ ? &*human_ : nullptr;
  SegmentRecord rec = simulateSegment(plant_, h, autonomyGain, x_, weights_, {substeps_, t_},
                                      logging_ ? &log_ : nullptr);
  x_ = rec.xEnd;
  t_ += weights_.tau;
  lastRms_ = std::sqrt(rec.uSquared / weights_.tau);
  ++segments_;
  return rec;
}

double SharedLoopSimulator::nudgeAmplitude() const {
  if (nudge_.amplitude) return *nudge_.amplitude;
  return std::max(nudge_.amplitudeFloor, nudge_.relativeAmplitude * lastRms_);
}

void SharedLoopSimulator::nudge(const Mat& autonomyGain) {
  if (nudge_.teleport) {
    Vec dir(stateDim());
    for (Index i = 0; i < dir.size(); ++i) dir(i) = 2.0 * rng_.uniform() - 1.0;
    const double scale = x_.norm() > 0.0 ? x_.norm() : 1.0;
    t_ += nudge_.holdDuration;
    teleport(scale * dir.normalized());
    return;
  }
  const Vec bias = rng_.draw(inputDim(), nudgeAmplitude());
  nudges_.push_back(bias);
  const HumanPolicy* h = human_ ? &*human_ : nullptr;
  x_ = simulateHold(plant_, h, autonomyGain, bias, x_, nudge_.holdDuration,
                    weights_.tau / substeps_, t_, logging_ ? &log_ : nullptr);
  t_ += nudge_.holdDuration;
}

void SharedLoopSimulator::teleport(const Vec& x) {
  if (x.size() != stateDim()) throw DimensionError("teleport: state has the wrong length");
  x_ = x;
  if (logging_) {
    const Vec ua0 = Vec::Zero(inputDim());
    log_.samples.push_back({t_, x_, human_ ? humanInput(*human_, x_) : ua0, ua0});
  }
}

}  // namespace slqr
