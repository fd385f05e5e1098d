#ifndef LDKGP_PREDICTOR_HPP
#define LDKGP_PREDICTOR_HPP

#include "ldkgp/trainer.hpp"

namespace ldkgp {

struct PredictiveResult {
  Vector mean;        // N*
  Matrix covariance;  // N* x N*, latent-signal covariance
};

struct PredictOptions {
  bool observation_noise = false;  // add sigma^2 to the covariance diagonal
  bool mean_only = false;
  // With fallback enabled, individuals absent from the embedding table
  // predict through the mean of the learned embeddings instead of erroring.
  bool unseen_fallback = false;
};

/// Predictive distribution over test signals:
///   mean = K_*Z (K_ZZ + sigma^2 I)^{-1} mu_q
///   cov  = K_** - K_*Z (K_ZZ + sigma^2 I)^{-1} K_*Z^T
PredictiveResult predict(const ModelState& state, const LongitudinalDataset& test,
                         const PredictOptions& opts = {});

Vector predict_mean(const ModelState& state, const LongitudinalDataset& test,
                    bool unseen_fallback = false);

struct CorrelationOptions {
  Index size_cap = 2000;
  bool observation_noise = false;  // normalize with sigma^2 on the diagonal
};

/// Predictive covariance over `data` normalized to a correlation matrix;
/// diagonal entries are clamped to at least the jitter before normalizing.
Matrix correlation_matrix(const ModelState& state, const LongitudinalDataset& data,
                          const CorrelationOptions& opts = {});

/// 1 - sum (a - p)^2 / sum (a - mean(a))^2; negative when predicting worse
/// than the mean.
double r_squared(const Vector& pred, const Vector& actual);

}  // namespace ldkgp

#endif
