#include "slqr/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "slqr/errors.hpp"

namespace slqr {

namespace {

void requireSquare(const Mat& M, const char* what) {
  if (M.rows() != M.cols() || M.rows() < 1) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << M.rows() << "x" << M.cols();
    throw DimensionError(os.str());
  }
}

// Column-stacking vec(): vec(A X B) = (B^T kron A) vec(X).
Mat kron(const Mat& A, const Mat& B) {
  Mat K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

Vec vectorize(const Mat& M) { return Eigen::Map<const Vec>(M.data(), M.size()); }

Mat unvectorize(const Vec& v, Index rows, Index cols) {
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

struct LinearSolve {
  Vec x;
  Index nullity = 0;
  double residual = 0.0;
};

// Minimum-norm solution of a possibly singular square or rectangular system.
// The nullity uses the same singular-value threshold as numericalRank().
LinearSolve solveMinimumNorm(const Mat& L, const Vec& rhs, const char* what) {
  Eigen::JacobiSVD<Mat> svd(L, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double thresh =
      static_cast<double>(std::max(L.rows(), L.cols())) * smax * 1e-12;
  Index rank = 0;
  for (Index k = 0; k < s.size(); ++k)
    if (s(k) > thresh) ++rank;
  svd.setThreshold(smax > 0 ? thresh / smax : 0.0);

  LinearSolve out;
  out.x = svd.solve(rhs);
  out.nullity = L.cols() - rank;
  out.residual = (L * out.x - rhs).norm();
  const double scale = std::max(1.0, rhs.norm());
  if (!out.x.allFinite() || out.residual > 1e-9 * scale) {
    std::ostringstream os;
    os << what << ": right-hand side is not in the image of the linear map (residual "
       << out.residual << ", nullity " << out.nullity << ")";
    throw InconsistentSystemError(os.str());
  }
  return out;
}

}  // namespace

void requireShape(const Mat& M, Index rows, Index cols, const char* what) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << M.rows() << "x" << M.cols();
    throw DimensionError(os.str());
  }
}

Index kappa(Index i, Index j, Index n) {
  if (n < 1 || j < 1 || i < j || i > n) {
    std::ostringstream os;
    os << "kappa: index (" << i << "," << j << ") out of range for n=" << n;
    throw DimensionError(os.str());
  }
  return kappa0(i - 1, j - 1, n) + 1;
}

Index dimensionFromTriangular(Index length) {
  const auto n = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(length) + 1.0) - 1.0) / 2.0));
  if (length < 1 || triangularSize(n) != length) {
    throw DimensionError("length " + std::to_string(length) + " is not a triangular number");
  }
  return n;
}

Vec vecL(const Mat& Z) {
  requireSquare(Z, "vecL");
  const Index n = Z.rows();
  Vec out(triangularSize(n));
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) out(kappa0(i, j, n)) = Z(i, j);
  return out;
}

Vec quadraticFeatures(const Vec& x) {
  const Index n = x.size();
  Vec out(triangularSize(n));
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) out(kappa0(i, j, n)) = x(i) * x(j);
  return out;
}

Mat gradVecL(const Vec& x) {
  const Index n = x.size();
  Mat G = Mat::Zero(triangularSize(n), n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      const Index row = kappa0(i, j, n);
      G(row, i) += x(j);
      G(row, j) += x(i);
    }
  }
  return G;
}

WeightVector::WeightVector(Index dim, Vec values) : n(dim), w(std::move(values)) {
  if (w.size() != triangularSize(n)) {
    throw DimensionError("weight vector length " + std::to_string(w.size()) +
                         " does not match n(n+1)/2 for n=" + std::to_string(n));
  }
}

double WeightVector::evaluate(const Vec& x) const { return quadraticFeatures(x).dot(w); }

WeightVector weightsFromMatrix(const Mat& P) {
  requireSquare(P, "weightsFromMatrix");
  const Index n = P.rows();
  Vec w(triangularSize(n));
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i)
      w(kappa0(i, j, n)) = (i == j) ? P(i, i) : P(i, j) + P(j, i);
  return {n, std::move(w)};
}

Mat matrixFromWeights(const WeightVector& W) {
  const Index n = dimensionFromTriangular(W.w.size());
  if (W.n != 0 && W.n != n) throw DimensionError("matrixFromWeights: inconsistent dimension");
  Mat P(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      const double v = W.w(kappa0(i, j, n));
      if (i == j) {
        P(i, i) = v;
      } else {
        P(i, j) = P(j, i) = 0.5 * v;
      }
    }
  }
  return P;
}

Mat expmAt(const Mat& M, double t) {
  requireSquare(M, "expmAt");
  if (!std::isfinite(t) || !M.allFinite()) throw NumericalError("expmAt: non-finite input");
  const Index n = M.rows();
  const Mat I = Mat::Identity(n, n);
  Mat A = M * t;

  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    A /= std::ldexp(1.0, squarings);
  }

  const Mat A2 = A * A;
  const Mat A4 = A2 * A2;
  const Mat A6 = A4 * A2;
  const Mat U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 +
                     b[3] * A2 + b[1] * I);
  const Mat V =
      A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;

  Mat E = (V - U).partialPivLu().solve(U + V);
  for (int k = 0; k < squarings; ++k) E = E * E;

  if (!E.allFinite()) throw NumericalError("expmAt: overflow in matrix exponential");
  return E;
}

Eigen::VectorXcd eigenvalues(const Mat& M) {
  requireSquare(M, "eigenvalues");
  Eigen::EigenSolver<Mat> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation did not converge");
  return es.eigenvalues();
}

double spectralAbscissa(const Mat& M) { return eigenvalues(M).real().maxCoeff(); }

bool isHurwitz(const Mat& M, double margin) { return spectralAbscissa(M) <= -margin; }

Index numericalRank(const Mat& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  const double thresh = static_cast<double>(std::max(M.rows(), M.cols())) * s(0) * rel_tol;
  Index rank = 0;
  for (Index k = 0; k < s.size(); ++k)
    if (s(k) > thresh) ++rank;
  return rank;
}

double conditionNumber(const Mat& M) {
  if (M.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  if (M.rows() < M.cols() || s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

Mat solveLyapunov(const Mat& Acl, const Mat& Qbar) {
  requireSquare(Acl, "solveLyapunov");
  const Index n = Acl.rows();
  requireShape(Qbar, n, n, "solveLyapunov: Qbar");
  if (!isHurwitz(Acl)) {
    throw NotStabilizingError("solveLyapunov: closed-loop matrix is not Hurwitz (max Re = " +
                              std::to_string(spectralAbscissa(Acl)) + ")");
  }
  const Mat I = Mat::Identity(n, n);
  const Mat At = Acl.transpose();
  // vec(P Acl) = (Acl^T kron I) vec P,  vec(Acl^T P) = (I kron Acl^T) vec P
  const Mat L = kron(At, I) + kron(I, At);
  Eigen::FullPivLU<Mat> lu(L);
  if (!lu.isInvertible()) throw NumericalError("solveLyapunov: singular Kronecker system");
  const Vec p = lu.solve(-vectorize(Qbar));
  return symmetrize(unvectorize(p, n, n));
}

SylvesterSolution solveSylvester(const Mat& A1, const Mat& A2, const Mat& W) {
  requireSquare(A1, "solveSylvester: A1");
  requireSquare(A2, "solveSylvester: A2");
  requireShape(W, A1.rows(), A2.rows(), "solveSylvester: W");
  const Index p = A1.rows();
  const Index q = A2.rows();
  const Mat L = kron(Mat::Identity(q, q), A1) + kron(A2.transpose(), Mat::Identity(p, p));
  const auto sol = solveMinimumNorm(L, vectorize(W), "solveSylvester");
  return {unvectorize(sol.x, p, q), sol.nullity, sol.residual};
}

SylvesterSolution solveSylvesterTranspose(const Mat& Li, const Mat& R, const Mat& W2) {
  const Index m = Li.rows();
  const Index n = Li.cols();
  requireShape(R, m, m, "solveSylvesterTranspose: R");
  requireShape(W2, n, n, "solveSylvesterTranspose: W2");
  // Column k of the map is the image of the k-th basis matrix e_pq.
  Mat L(n * n, m * n);
  const Mat LtR = Li.transpose() * R;
  for (Index q = 0; q < n; ++q) {
    for (Index p = 0; p < m; ++p) {
      Mat E = Mat::Zero(m, n);
      E(p, q) = 1.0;
      const Mat img = LtR * E + (LtR * E).transpose();
      L.col(q * m + p) = vectorize(img);
    }
  }
  const auto sol = solveMinimumNorm(L, vectorize(W2), "solveSylvesterTranspose");
  return {unvectorize(sol.x, m, n), sol.nullity, sol.residual};
}

Mat careResidual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  return P * A + A.transpose() * P - P * B * R.llt().solve(B.transpose() * P) + Q;
}

CareSolution kleinmanCare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& K0,
                          const KleinmanOptions& options) {
  requireSquare(A, "kleinmanCare: A");
  const Index n = A.rows();
  if (B.rows() != n || B.cols() < 1) throw DimensionError("kleinmanCare: B must have n rows");
  const Index m = B.cols();
  requireShape(Q, n, n, "kleinmanCare: Q");
  requireShape(R, m, m, "kleinmanCare: R");
  requireShape(K0, m, n, "kleinmanCare: K0");

  Eigen::LLT<Mat> Rllt(R);
  if (Rllt.info() != Eigen::Success) throw NumericalError("kleinmanCare: R is not positive definite");
  if (!isHurwitz(A + B * K0)) {
    throw NotStabilizingError("kleinmanCare: initial gain does not stabilize A + B K0");
  }

  CareSolution out;
  Mat K = K0;
  Mat Pprev;
  for (int it = 0; it < options.maxIterations; ++it) {
    const Mat P = solveLyapunov(A + B * K, Q + K.transpose() * R * K);
    out.valueHistory.push_back(P);
    K = -Rllt.solve(B.transpose() * P);
    out.iterations = it + 1;
    if (it > 0 && (P - Pprev).norm() <= options.relTol * std::max(1.0, P.norm())) {
      out.P = P;
      out.K = K;
      out.residual = careResidual(A, B, Q, R, P).norm();
      return out;
    }
    if (!isHurwitz(A + B * K)) {
      throw NumericalError("kleinmanCare: iterate " + std::to_string(it + 1) +
                           " produced a destabilizing gain");
    }
    Pprev = P;
  }
  std::ostringstream os;
  os << "kleinmanCare: no convergence after " << options.maxIterations << " iterations; last step "
     << (out.valueHistory.size() >= 2
             ? (out.valueHistory.back() - out.valueHistory[out.valueHistory.size() - 2]).norm()
             : 0.0);
  throw NumericalError(os.str());
}

}  // namespace slqr
