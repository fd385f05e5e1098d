#ifndef LDKGP_LINALG_HPP
#define LDKGP_LINALG_HPP

#include <cmath>
#include <string>

#include "ldkgp/types.hpp"

// Dense factorization kernels used by the solver. Every inverse in the
// solver path goes through a Cholesky factor; no explicit matrix inversion.

namespace ldkgp {

inline constexpr double kSymmetryTol = 1e-8;

template <typename T>
MatrixX<T> symmetrize(const MatrixX<T>& m) {
  return ((m + m.transpose()) * T(0.5)).eval();
}

template <typename T>
MatrixX<T> add_jitter(const MatrixX<T>& m, T eps) {
  if (m.rows() != m.cols()) throw ShapeMismatch("add_jitter: matrix not square");
  MatrixX<T> out = m;
  out.diagonal().array() += eps;
  return out;
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// The input is symmetrized before factorization; a non-positive pivot
/// signals the caller to add jitter.
template <typename T>
MatrixX<T> cholesky_lower(const MatrixX<T>& m) {
  const Index n = m.rows();
  if (m.cols() != n) throw ShapeMismatch("cholesky_lower: matrix not square");
  if (n > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * (1 + m.cwiseAbs().maxCoeff()))
    throw ShapeMismatch("cholesky_lower: matrix not symmetric within tolerance");
  MatrixX<T> a = symmetrize(m);
  MatrixX<T> l = MatrixX<T>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    T d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > T(0)))
      throw NotPositiveDefinite("cholesky_lower: pivot " + std::to_string(j) +
                                " is not positive (" + std::to_string(double(d)) + ")");
    d = std::sqrt(d);
    l(j, j) = d;
    if (j + 1 < n) {
      l.col(j).tail(n - j - 1) =
          (a.col(j).tail(n - j - 1) -
           l.bottomLeftCorner(n - j - 1, j) * l.row(j).head(j).transpose()) /
          d;
    }
  }
  return l;
}

/// Solve L * C = U for lower-triangular L given lower-triangular factors
/// U and C, by back-substitution along each row:
///   L[i,i-k] = (U[i,i-k] - sum_{j<k} L[i,i-j] C[i-j,i-k]) / C[i-k,i-k]
template <typename T>
MatrixX<T> solve_lq(const MatrixX<T>& u_factor, const MatrixX<T>& c_factor) {
  const Index n = u_factor.rows();
  if (u_factor.cols() != n || c_factor.rows() != n || c_factor.cols() != n)
    throw ShapeMismatch("solve_lq: factors must be square and same size");
  for (Index i = 0; i < n; ++i)
    if (c_factor(i, i) == T(0))
      throw SingularFactor("solve_lq: zero diagonal in C at " + std::to_string(i));
  MatrixX<T> l = MatrixX<T>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k <= i; ++k) {
      T acc = u_factor(i, i - k);
      for (Index j = 0; j < k; ++j) acc -= l(i, i - j) * c_factor(i - j, i - k);
      l(i, i - k) = acc / c_factor(i - k, i - k);
    }
  }
  return l;
}

/// x with m * x = rhs for symmetric positive-definite m, via Cholesky.
template <typename T>
MatrixX<T> solve_psd(const MatrixX<T>& m, const MatrixX<T>& rhs) {
  if (rhs.rows() != m.rows()) throw ShapeMismatch("solve_psd: rhs rows mismatch");
  const MatrixX<T> l = cholesky_lower(m);
  MatrixX<T> x = l.template triangularView<Eigen::Lower>().solve(rhs);
  l.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

/// Same solve reusing a precomputed lower Cholesky factor.
template <typename T>
MatrixX<T> solve_with_chol(const MatrixX<T>& l, const MatrixX<T>& rhs) {
  MatrixX<T> x = l.template triangularView<Eigen::Lower>().solve(rhs);
  l.transpose().template triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

template <typename T>
T log_det_from_chol(const MatrixX<T>& l) {
  return T(2) * l.diagonal().array().log().sum();
}

}  // namespace ldkgp

#endif
