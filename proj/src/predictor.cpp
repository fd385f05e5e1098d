#include "ldkgp/predictor.hpp"

#include <cmath>

#include "ldkgp/linalg.hpp"

namespace ldkgp {

namespace {

// Kernel matrices between a test set and the model, with the unseen-id
// policy applied to the embedding rows.
struct TestBlocks {
  Matrix kxz;      // N* x M
  Matrix latents;  // N* x D_v
  Matrix embeds;   // N* x D_i
};

TestBlocks test_blocks(const ModelState& state, const LongitudinalDataset& test,
                       bool unseen_fallback) {
  std::mt19937_64 rng(0);  // eval mode draws nothing
  TestBlocks out;
  out.latents = state.kernel.bypass_encoder
                    ? test.covariates
                    : encode_batch(state.kernel.encoder, test.covariates, PassMode::Eval, rng);
  const auto& table = state.kernel.embeddings;
  out.embeds.resize(test.n_rows(), table.dim());
  Vector mean_row = table.individuals.colwise().mean().transpose();
  for (Index r = 0; r < test.n_rows(); ++r) {
    const int id = test.individual[static_cast<std::size_t>(r)];
    if (id >= 1 && id <= table.n_individuals()) {
      out.embeds.row(r) = table.individuals.row(id - 1);
    } else if (unseen_fallback) {
      out.embeds.row(r) = mean_row.transpose();
    } else {
      throw UnknownEntity("predict: individual id " + std::to_string(id) +
                          " was not seen in training");
    }
  }
  const double av2 = state.kernel.alpha_v * state.kernel.alpha_v;
  const double ai2 = state.kernel.alpha_i * state.kernel.alpha_i;
  out.kxz = av2 * se_cross(out.latents, state.z.block_v()) +
            ai2 * se_cross(out.embeds, state.z.block_i());
  return out;
}

KernelMatrices inducing_gram(const ModelState& state) {
  const double av2 = state.kernel.alpha_v * state.kernel.alpha_v;
  const double ai2 = state.kernel.alpha_i * state.kernel.alpha_i;
  KernelMatrices km;
  km.kzz = av2 * se_cross(state.z.block_v(), state.z.block_v()) +
           ai2 * se_cross(state.z.block_i(), state.z.block_i());
  km.jitter = state.config.jitter;
  return km;
}

}  // namespace

PredictiveResult predict(const ModelState& state, const LongitudinalDataset& test,
                         const PredictOptions& opts) {
  const TestBlocks blocks = test_blocks(state, test, opts.unseen_fallback);
  const KernelMatrices km = inducing_gram(state);
  const Matrix kzz_noise =
      add_jitter<double>(kzz_effective(km), state.noise.sigma2());
  const Matrix chol = cholesky_lower<double>(kzz_noise);

  PredictiveResult out;
  const Vector w = solve_with_chol<double>(chol, Matrix(state.posterior.mu_q)).col(0);
  out.mean = (blocks.kxz * w) * state.outcome_scale;
  if (opts.mean_only) return out;

  const double av2 = state.kernel.alpha_v * state.kernel.alpha_v;
  const double ai2 = state.kernel.alpha_i * state.kernel.alpha_i;
  const Matrix kss = av2 * se_cross(blocks.latents, blocks.latents) +
                     ai2 * se_cross(blocks.embeds, blocks.embeds);
  const Matrix solved = solve_with_chol<double>(chol, blocks.kxz.transpose());
  Matrix cov = kss - blocks.kxz * solved;
  if (opts.observation_noise) cov.diagonal().array() += state.noise.sigma2();
  out.covariance =
      symmetrize<double>(cov) * (state.outcome_scale * state.outcome_scale);
  return out;
}

Vector predict_mean(const ModelState& state, const LongitudinalDataset& test,
                    bool unseen_fallback) {
  PredictOptions opts;
  opts.mean_only = true;
  opts.unseen_fallback = unseen_fallback;
  return predict(state, test, opts).mean;
}

Matrix correlation_matrix(const ModelState& state, const LongitudinalDataset& data,
                          const CorrelationOptions& opts) {
  if (data.n_rows() > opts.size_cap)
    throw SizeCapExceeded("correlation_matrix: " + std::to_string(data.n_rows()) +
                          " rows exceed the cap of " + std::to_string(opts.size_cap));
  PredictOptions popts;
  popts.observation_noise = opts.observation_noise;
  PredictiveResult pred = predict(state, data, popts);
  Matrix& cov = pred.covariance;
  const double floor =
      state.config.jitter * state.outcome_scale * state.outcome_scale;
  Vector scale(cov.rows());
  for (Index i = 0; i < cov.rows(); ++i)
    scale(i) = 1.0 / std::sqrt(std::max(cov(i, i), floor));
  Matrix corr = scale.asDiagonal() * cov * scale.asDiagonal();
  corr.diagonal().setOnes();
  return corr;
}

double r_squared(const Vector& pred, const Vector& actual) {
  if (pred.size() != actual.size() || pred.size() == 0)
    throw ShapeMismatch("r_squared: length mismatch or empty input");
  const double mean = actual.mean();
  const double total = (actual.array() - mean).square().sum();
  if (total <= 0.0)
    throw DegenerateTarget("r_squared: actual values are constant");
  const double resid = (actual - pred).squaredNorm();
  return 1.0 - resid / total;
}

}  // namespace ldkgp
