#ifndef LDKGP_TESTUTIL_HPP
#define LDKGP_TESTUTIL_HPP

#include <random>

#include "ldkgp/dataset.hpp"
#include "ldkgp/types.hpp"

namespace ldkgp::testutil {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

inline Vector random_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

// random symmetric positive-definite matrix G^T G + I
inline Matrix random_pd(Index n, std::mt19937_64& rng) {
  Matrix g = random_matrix(n, n, rng);
  return g.transpose() * g + Matrix::Identity(n, n);
}

// dense solve by Gaussian elimination with partial pivoting; test oracle
// independent of the Cholesky path
inline Matrix gauss_solve(Matrix a, Matrix b) {
  const Index n = a.rows();
  for (Index k = 0; k < n; ++k) {
    Index piv = k;
    for (Index i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    a.row(k).swap(a.row(piv));
    b.row(k).swap(b.row(piv));
    for (Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a.row(i).tail(n - k) -= f * a.row(k).tail(n - k);
      b.row(i) -= f * b.row(k);
    }
  }
  for (Index k = n - 1; k >= 0; --k) {
    for (Index i = 0; i < k; ++i) b.row(i) -= a(i, k) / a(k, k) * b.row(k);
    b.row(k) /= a(k, k);
  }
  return b;
}

// small synthetic dataset with dense individual ids
inline LongitudinalDataset random_dataset(Index n_rows, Index n_cols, int n_individuals,
                                          std::mt19937_64& rng) {
  LongitudinalDataset d;
  d.covariates = random_matrix(n_rows, n_cols, rng);
  d.outcome = random_vector(n_rows, rng);
  d.time.resize(n_rows);
  std::uniform_int_distribution<int> pick(1, n_individuals);
  for (Index r = 0; r < n_rows; ++r) {
    d.time(r) = static_cast<double>(r);
    d.individual.push_back(r < n_individuals ? static_cast<int>(r) + 1 : pick(rng));
  }
  for (int i = 0; i < n_individuals; ++i) d.id_labels.push_back(std::to_string(i + 1));
  for (Index c = 0; c < n_cols; ++c) d.column_names.push_back("x" + std::to_string(c + 1));
  d.column_kinds.assign(n_cols, ColumnKind::Continuous);
  d.category_codes.assign(n_cols, {});
  return d;
}

}  // namespace ldkgp::testutil

#endif
