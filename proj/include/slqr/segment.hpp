#pragma once

#include "slqr/linalg.hpp"

namespace slqr {

/// Everything measured over one reward window [t_k, t_k + tau]. All
/// integrals are taken along the closed-loop flow with no exploration input.
///
/// Row vectors of length N = n(n+1)/2 follow vecL ordering.
struct SegmentRecord {
  double tStart = 0.0;
  double tau = 0.0;
  Vec xStart;
  Vec xEnd;

  /// int x^T Q x dt
  double rX = 0.0;
  /// int u_h^T M u_h dt
  double rUh = 0.0;
  /// int u_h^T R u_h dt; the measured first-iteration reward when the target
  /// policy is the human signal itself.
  double rUhR = 0.0;
  /// int u_a^T R u_a dt, measured directly.
  double rUaR = 0.0;
  /// int |u|^2 dt for the full input u = u_h + u_a.
  double uSquared = 0.0;

  /// int x_p x_q dt for p >= q.
  Vec moments;
  /// int u_h^T B^T grad(phi)^T dt
  Vec deltaUh;
  /// int u_a^T B^T grad(phi)^T dt
  Vec deltaUa;
  /// Row p + q*m holds int x^T e_pq^T B^T grad(phi)^T dt, e_pq being m x n.
  Mat deltaBasis;

  Index stateDim() const { return xStart.size(); }

  /// phi(xEnd) - phi(xStart)
  Vec phiDifference() const { return quadraticFeatures(xEnd) - quadraticFeatures(xStart); }

  /// int x^T S x dt for a symmetric S, from the stored moments.
  double quadraticIntegral(const Mat& S) const { return weightsFromMatrix(S).w.dot(moments); }

  /// sum_{p,q} K(p,q) * deltaBasis row (p,q) = int x^T K^T B^T grad(phi)^T dt
  Vec deltaForGain(const Mat& K) const;
};

inline Vec SegmentRecord::deltaForGain(const Mat& K) const {
  const Index m = K.rows();
  const Index n = K.cols();
  requireShape(deltaBasis, m * n, moments.size(), "deltaForGain: deltaBasis");
  Vec out = Vec::Zero(moments.size());
  for (Index q = 0; q < n; ++q)
    for (Index p = 0; p < m; ++p) out += K(p, q) * deltaBasis.row(q * m + p).transpose();
  return out;
}

}  // namespace slqr
