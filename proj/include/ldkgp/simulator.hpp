#ifndef LDKGP_SIMULATOR_HPP
#define LDKGP_SIMULATOR_HPP

#include <random>
#include <vector>

#include "ldkgp/dataset.hpp"
#include "ldkgp/types.hpp"

namespace ldkgp {

/// Synthetic longitudinal data: covariates from a fixed random network over
/// low-dimensional base features, a nonlinear outcome signal, and residuals
/// with AR(1) within-individual correlation plus optional cluster blocks.
struct SimulationSpec {
  int individuals = 40;
  int observations = 20;     // per individual
  Index covariates = 30;     // P
  Index base_dim = 10;
  int clusters = 0;          // 0 = longitudinal correlation only; otherwise 2..
  double ar_decay = 0.9;     // rho
  double residual_scale = 1.0;
  double signal_scale = 5.0; // std of the noiseless signal f(X)
  std::uint64_t seed = 0;

  void validate() const;
  Index n_rows() const { return static_cast<Index>(individuals) * observations; }
};

/// Residual covariance: block-diagonal AR(1) per individual
/// (rho^|t-q| within, zero across), plus unit blocks over same-cluster
/// rows when clusters >= 2. Scaled by residual_scale^2.
Matrix build_covariance(const SimulationSpec& spec);

struct GroundTruth {
  std::vector<int> cluster_of_individual;  // I, values 0..C-1 (all zero when C=0)
  Vector signal;                           // noiseless f(X), length N
  Matrix residual_covariance;              // N x N
};

struct SimulationResult {
  LongitudinalDataset data;
  GroundTruth truth;
};

SimulationResult generate(const SimulationSpec& spec);

/// One residual draw eps ~ N(0, Sigma) for a prebuilt covariance; exposed
/// so sampling behavior can be checked against Sigma directly.
Vector sample_residual(const Matrix& covariance, std::mt19937_64& rng);

}  // namespace ldkgp

#endif
