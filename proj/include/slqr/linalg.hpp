#pragma once

// Dense small-matrix numerics shared by the learners, the simulator and the
// oracles. Matrices are Eigen::MatrixXd (column-major storage).

#include <Eigen/Dense>

#include <vector>

namespace slqr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Number of independent entries of a symmetric n x n matrix, n(n+1)/2.
constexpr Index triangularSize(Index n) { return n * (n + 1) / 2; }

/// 1-based position of Z(i,j), i >= j, inside vecL(Z). Indices are 1-based
/// to match the usual notation: kappa(1,1,n) == 1, kappa(n,n,n) == n(n+1)/2.
Index kappa(Index i, Index j, Index n);

/// Same as kappa() but with 0-based row/column in and 0-based position out.
inline Index kappa0(Index i, Index j, Index n) {
  // columns 0..j-1 contribute n, n-1, ..., n-j+1 entries
  return j * n - j * (j - 1) / 2 + (i - j);
}

/// Stacks the columns of the lower triangle of a square matrix.
Vec vecL(const Mat& Z);

/// phi(x) = vecL(x x^T): the quadratic regressors of a state.
Vec quadraticFeatures(const Vec& x);

/// Jacobian of phi(x) = vecL(x x^T); N rows by n columns.
Mat gradVecL(const Vec& x);

/// Coefficients W of a quadratic form so that x^T P x == phi(x)^T W.
struct WeightVector {
  Index n = 0;
  Vec w;

  WeightVector() = default;
  WeightVector(Index dim, Vec values);

  double evaluate(const Vec& x) const;
};

/// W(kappa(i,j)) = P(i,j) + P(j,i) - delta_ij P(i,j).
WeightVector weightsFromMatrix(const Mat& P);

/// Inverse of weightsFromMatrix(); always returns a symmetric matrix.
Mat matrixFromWeights(const WeightVector& W);

/// Recovers n from a vector length n(n+1)/2; throws when not triangular.
Index dimensionFromTriangular(Index length);

/// e^{M t} by scaling and squaring with a degree-13 Pade approximant.
Mat expmAt(const Mat& M, double t);

/// Largest real part over the eigenvalues of a square matrix.
double spectralAbscissa(const Mat& M);

/// max Re(lambda) <= -margin. The default margin is 1e-9.
bool isHurwitz(const Mat& M, double margin = 1e-9);

/// Eigenvalues of a real square matrix.
Eigen::VectorXcd eigenvalues(const Mat& M);

/// Numerical rank with threshold max(rows, cols) * sigma_max * rel_tol.
Index numericalRank(const Mat& M, double rel_tol = 1e-12);

/// 2-norm condition number sigma_max / sigma_min; infinity when singular.
double conditionNumber(const Mat& M);

Mat symmetrize(const Mat& M);

/// Solves P Acl + Acl^T P = -Qbar for a Hurwitz Acl.
Mat solveLyapunov(const Mat& Acl, const Mat& Qbar);

struct SylvesterSolution {
  Mat X;
  /// Dimension of the kernel of the linear map; zero when the solution is unique.
  Index nullity = 0;
  double residual = 0.0;
};

/// Solves A1 X + X A2 = W. When the map is singular the minimum-norm
/// solution is returned and `nullity` reports the kernel dimension; an
/// inconsistent right-hand side throws InconsistentSystemError.
SylvesterSolution solveSylvester(const Mat& A1, const Mat& A2, const Mat& W);

/// Solves Li^T R Khat + Khat^T R Li = W2 for Khat (same shape as Li).
/// Returns the minimum-norm solution; throws InconsistentSystemError when
/// W2 lies outside the image of the map.
SylvesterSolution solveSylvesterTranspose(const Mat& Li, const Mat& R, const Mat& W2);

/// Residual P A + A^T P - P B R^-1 B^T P + Q.
Mat careResidual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

struct CareSolution {
  Mat P;
  Mat K;
  int iterations = 0;
  /// Frobenius norm of the Riccati residual at P.
  double residual = 0.0;
  /// P_0, P_1, ... as produced by the policy evaluations.
  std::vector<Mat> valueHistory;
};

struct KleinmanOptions {
  double relTol = 1e-12;
  int maxIterations = 100;
};

/// Model-based Newton-Kleinman iteration from a stabilizing K0.
CareSolution kleinmanCare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& K0,
                          const KleinmanOptions& options = {});

/// Throws DimensionError unless `M` is rows x cols.
void requireShape(const Mat& M, Index rows, Index cols, const char* what);

}  // namespace slqr
