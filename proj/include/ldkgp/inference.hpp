#ifndef LDKGP_INFERENCE_HPP
#define LDKGP_INFERENCE_HPP

#include <random>

#include "ldkgp/kernels.hpp"
#include "ldkgp/types.hpp"

namespace ldkgp {

/// q(u | X, Z) = N(mu_q, L_q L_q^T) with lower-triangular L_q.
struct VariationalPosterior {
  Vector mu_q;
  Matrix l_q;
};

/// Observation noise of the Gaussian likelihood, kept in log space for
/// unconstrained optimization.
struct NoiseModel {
  double log_sigma2 = 0.0;

  double sigma2() const { return std::exp(log_sigma2); }
  static NoiseModel from_sigma2(double s2) {
    if (!(s2 > 0)) throw InvalidConfig("sigma2 must be positive");
    return NoiseModel{std::log(s2)};
  }
};

enum class LqMode { Diagonal, Full };

struct PosteriorOptions {
  LqMode mode = LqMode::Diagonal;
  // Reproduces the original coupled recurrence L_q chol(I + 11^T) = U
  // instead of the variationally optimal L_q = U. Kept for comparison;
  // the coupled solution is not a stationary point of the ELBO.
  bool ones_coupling = false;
};

/// Jittered prior covariance over inducing signals; every inference formula
/// uses this same matrix so values, optima and gradients stay consistent.
Matrix kzz_effective(const KernelMatrices& kz);

/// A = K_XZ K_ZZ^{-1}, computed by Cholesky solve.
Matrix projection_a(const KernelMatrices& kz);

/// B = (K_ZZ + sigma^{-2} K_XZ^T K_XZ)^{-1}, symmetric.
Matrix projection_b(const KernelMatrices& kz, const NoiseModel& noise);

/// Closed-form optimum of the ELBO for fixed kernel matrices:
///   mu_q = sigma^{-2} K_ZZ B K_XZ^T y
///   full:     L_q = chol(K_ZZ B K_ZZ)
///   diagonal: l_j = ((K_ZZ B K_ZZ)^{-1})_{jj}^{-1/2}
VariationalPosterior optimal_posterior(const KernelMatrices& kz, const Vector& y,
                                       const NoiseModel& noise,
                                       const PosteriorOptions& opts = {});

/// Evidence lower bound in closed form (Gaussian log-likelihood constants
/// independent of the parameters are dropped):
///   L = -N log sigma - (||y - A mu_q||^2 + ||A L_q||_F^2) / (2 sigma^2) - KL
double elbo_closed_form(const KernelMatrices& kz, const VariationalPosterior& post,
                        const Vector& y, const NoiseModel& noise);

/// KL[q(u) || N(0, K_ZZ)] in closed form; nonnegative.
double kl_term(const KernelMatrices& kz, const VariationalPosterior& post);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of the ELBO: u = mu_q + L_q eps with eps ~ N(0, I),
/// f = A u, sampled expected log-likelihood minus the exact KL term.
/// Comparison oracle only; never the default solver.
McEstimate elbo_monte_carlo(const KernelMatrices& kz, const VariationalPosterior& post,
                            const Vector& y, const NoiseModel& noise, Index samples,
                            std::mt19937_64& rng);

}  // namespace ldkgp

#endif
