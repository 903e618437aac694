#include "slqr/regression.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "slqr/errors.hpp"

namespace slqr {

RegressionSystem::RegressionSystem(Index n) : n_(n), cond_(std::numeric_limits<double>::infinity()) {
  if (n < 1) throw DimensionError("RegressionSystem: state dimension must be >= 1");
}

void RegressionSystem::addRow(const Vec& row, double rhs) {
  if (row.size() != minRows()) throw DimensionError("RegressionSystem: row has the wrong length");
  if (!row.allFinite() || !std::isfinite(rhs)) throw NumericalError("RegressionSystem: non-finite row");
  rows_.push_back(row);
  rhs_.push_back(rhs);
  cond_ = slqr::conditionNumber(matrix());
}

Mat RegressionSystem::matrix() const {
  Mat A(rows(), minRows());
  for (Index k = 0; k < rows(); ++k) A.row(k) = rows_[static_cast<std::size_t>(k)].transpose();
  return A;
}

Vec RegressionSystem::rhs() const { return Eigen::Map<const Vec>(rhs_.data(), rows()); }

Index RegressionSystem::numericalRank() const { return slqr::numericalRank(matrix()); }

WeightVector solveWeights(const RegressionSystem& sys, const WeightSolveOptions& options) {
  const Index N = sys.minRows();
  const Mat A = sys.matrix();
  const Vec b = sys.rhs();
  if (sys.rows() < N) {
    throw CollinearityError("regression has " + std::to_string(sys.rows()) + " rows, needs " +
                                std::to_string(N),
                            sys.rows() == 0 ? 0 : slqr::numericalRank(A), N, sys.conditionNumber());
  }
  const Index rank = slqr::numericalRank(A);
  if (rank < N || sys.conditionNumber() > options.kappaMax) {
    std::ostringstream os;
    os << "regression data is collinear: numerical rank " << rank << " of " << N
       << ", condition number " << sys.conditionNumber();
    throw CollinearityError(os.str(), rank, N, sys.conditionNumber());
  }
  const Vec w = A.colPivHouseholderQr().solve(b);
  const double residual = (A * w - b).norm();
  if (!w.allFinite() || residual > options.consistencyTol * std::max(b.norm(), 1e-300)) {
    std::ostringstream os;
    os << "regression system is inconsistent: residual " << residual << " vs |b| " << b.norm();
    throw InconsistentSystemError(os.str());
  }
  return {sys.stateDim(), w};
}

}  // namespace slqr
