#include "ldkgp/inference.hpp"

#include <cmath>

#include "ldkgp/linalg.hpp"

namespace ldkgp {

Matrix kzz_effective(const KernelMatrices& kz) {
  return add_jitter<double>(symmetrize<double>(kz.kzz), kz.jitter);
}

Matrix projection_a(const KernelMatrices& kz) {
  // A K_ZZ = K_XZ  <=>  K_ZZ A^T = K_XZ^T
  const Matrix kzz = kzz_effective(kz);
  return solve_psd<double>(kzz, kz.kxz.transpose()).transpose();
}

Matrix projection_b(const KernelMatrices& kz, const NoiseModel& noise) {
  const Matrix kzz = kzz_effective(kz);
  const Matrix operand =
      symmetrize<double>(kzz + kz.kxz.transpose() * kz.kxz / noise.sigma2());
  const Index m = kzz.rows();
  return solve_psd<double>(operand, Matrix::Identity(m, m));
}

VariationalPosterior optimal_posterior(const KernelMatrices& kz, const Vector& y,
                                       const NoiseModel& noise,
                                       const PosteriorOptions& opts) {
  if (kz.kxz.rows() != y.size())
    throw ShapeMismatch("optimal_posterior: y length does not match K_XZ");
  const Matrix kzz = kzz_effective(kz);
  const Index m = kzz.rows();
  const double s2 = noise.sigma2();
  const Matrix b = projection_b(kz, noise);

  VariationalPosterior post;
  post.mu_q = kzz * (b * (kz.kxz.transpose() * y)) / s2;

  const Matrix core = symmetrize<double>(kzz * b * kzz);
  const Matrix u = cholesky_lower<double>(core);
  if (opts.ones_coupling) {
    const Matrix c =
        cholesky_lower<double>(Matrix(Matrix::Identity(m, m) + Matrix::Ones(m, m)));
    const Matrix full = solve_lq<double>(u, c);
    post.l_q = opts.mode == LqMode::Full
                   ? full
                   : Matrix(full.diagonal().asDiagonal());
  } else if (opts.mode == LqMode::Full) {
    post.l_q = u;
  } else {
    // diagonal argmax: l_j = core^{-1}_{jj}^{-1/2}, via columns of U^{-1}
    const Matrix uinv = u.triangularView<Eigen::Lower>().solve(Matrix::Identity(m, m));
    Vector diag(m);
    for (Index j = 0; j < m; ++j) diag(j) = 1.0 / uinv.col(j).norm();
    post.l_q = diag.asDiagonal();
  }
  return post;
}

double kl_term(const KernelMatrices& kz, const VariationalPosterior& post) {
  const Matrix kzz = kzz_effective(kz);
  const Index m = kzz.rows();
  if (post.mu_q.size() != m || post.l_q.rows() != m)
    throw ShapeMismatch("kl_term: posterior dimension mismatch");
  const Matrix chol_kzz = cholesky_lower<double>(kzz);
  const double logdet_kzz = log_det_from_chol<double>(chol_kzz);
  const double logdet_lq2 = 2.0 * post.l_q.diagonal().array().log().sum();
  // tr(K_ZZ^{-1} L L^T) = ||chol(K_ZZ)^{-1} L||_F^2
  const Matrix w = chol_kzz.triangularView<Eigen::Lower>().solve(post.l_q);
  const double trace_term = w.squaredNorm();
  const Vector v = chol_kzz.triangularView<Eigen::Lower>().solve(post.mu_q);
  const double quad = v.squaredNorm();
  return 0.5 * (logdet_kzz - logdet_lq2 - static_cast<double>(m) + trace_term + quad);
}

double elbo_closed_form(const KernelMatrices& kz, const VariationalPosterior& post,
                        const Vector& y, const NoiseModel& noise) {
  if (kz.kxz.rows() != y.size())
    throw ShapeMismatch("elbo_closed_form: y length does not match K_XZ");
  for (Index j = 0; j < post.l_q.rows(); ++j)
    if (!(post.l_q(j, j) > 0))
      throw NotPositiveDefinite("elbo_closed_form: L_q diagonal must be positive");
  const double s2 = noise.sigma2();
  const Index n = y.size();
  const Matrix a = projection_a(kz);
  const Vector resid = y - a * post.mu_q;
  const double fluct = (a * post.l_q).squaredNorm();
  const double data_term =
      -0.5 * static_cast<double>(n) * std::log(s2) - (resid.squaredNorm() + fluct) / (2 * s2);
  const double value = data_term - kl_term(kz, post);
  if (!std::isfinite(value)) throw NonFiniteValue("elbo_closed_form: non-finite result");
  return value;
}

McEstimate elbo_monte_carlo(const KernelMatrices& kz, const VariationalPosterior& post,
                            const Vector& y, const NoiseModel& noise, Index samples,
                            std::mt19937_64& rng) {
  if (samples < 1) throw InvalidConfig("elbo_monte_carlo: samples must be >= 1");
  const double s2 = noise.sigma2();
  const Index n = y.size();
  const Index m = post.mu_q.size();
  const Matrix a = projection_a(kz);
  const Vector base = y - a * post.mu_q;
  const Matrix g = a * post.l_q;  // N x M
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double log_term = -0.5 * static_cast<double>(n) * std::log(s2);
  double sum = 0.0, sumsq = 0.0;
  Vector eps(m);
  for (Index s = 0; s < samples; ++s) {
    for (Index j = 0; j < m; ++j) eps(j) = gauss(rng);
    const double q = (base - g * eps).squaredNorm();
    const double v = log_term - q / (2 * s2);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / static_cast<double>(samples);
  McEstimate out;
  out.value = mean - kl_term(kz, post);
  if (samples > 1) {
    const double var =
        (sumsq - sum * sum / static_cast<double>(samples)) / static_cast<double>(samples - 1);
    out.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
  }
  return out;
}

}  // namespace ldkgp
