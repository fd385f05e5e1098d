#ifndef LDKGP_TRAINER_HPP
#define LDKGP_TRAINER_HPP

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ldkgp/dataset.hpp"
#include "ldkgp/inference.hpp"
#include "ldkgp/kernels.hpp"
#include "ldkgp/types.hpp"

namespace ldkgp {

enum class SolverKind { ClosedForm, Sampling };

struct TrainConfig {
  Index latent_dim_v = 10;   // D_v
  Index latent_dim_i = 10;   // D_i
  Index hidden_dim = 16;     // encoder H
  Index inducing_count = 10; // M
  int grad_steps = 10;       // T: optimizer passes per posterior update
  double learning_rate = 1e-3;
  double embedding_rate = 1e-2;
  double weight_decay = 0.0;
  Index batch_size = 1024;
  int max_epochs = 300;
  int patience = 2;
  // Validation decreases within this tolerance count as ties.
  double early_stop_tolerance = 5e-3;
  double jitter = 1e-3;
  std::uint64_t seed = 0;
  LqMode lq_mode = LqMode::Diagonal;
  bool ones_coupling = false;
  SolverKind solver = SolverKind::ClosedForm;
  Index mc_samples = 8;  // per gradient step of the sampling solver
  bool use_time_varying = true;
  bool use_time_invariant = true;
  bool bypass_encoder = false;  // plain SE kernel on raw covariates
  bool train_dropout = true;
  bool check_posterior_improves = false;  // debug: ELBO nondecrease each update
  int threads = 1;

  void validate() const;
};

/// Adam moment buffers keyed by parameter-group name; one time step per
/// optimizer_step call.
struct AdamState {
  std::map<std::string, Matrix> m1, m2;
  long t = 0;
};

struct ModelState {
  TrainConfig config;
  KernelParams kernel;
  InducingPoints z;
  NoiseModel noise;
  VariationalPosterior posterior;
  AdamState opt;
  int epoch = 0;
  double outcome_scale = 1.0;  // train-split outcome std used internally

  PosteriorOptions posterior_options() const {
    return PosteriorOptions{config.lq_mode, config.ones_coupling};
  }
};

ModelState init_state(const TrainConfig& cfg, const LongitudinalDataset& data,
                      std::mt19937_64& rng);

/// Gradients of the batch objective w.r.t. every trainable group
/// (ascent direction).
struct Gradients {
  double alpha_v = 0.0;
  double alpha_i = 0.0;
  double log_sigma2 = 0.0;
  Matrix z;
  EncoderGrads encoder;
  Matrix embeddings;  // I x D_i
  // sampling solver only
  Vector mu_q;
  Matrix l_q;
};

/// Batch objective: data term of the ELBO rescaled by data_scale plus the
/// KL term weighted by kl_weight. The posterior is held fixed.
double batch_objective(const ModelState& state, const LongitudinalDataset& batch,
                       double data_scale, double kl_weight, PassMode mode,
                       std::mt19937_64& rng);

Gradients elbo_gradients(const ModelState& state, const LongitudinalDataset& batch,
                         double data_scale, double kl_weight, PassMode mode,
                         std::mt19937_64& rng);

struct LearningRates {
  double base = 1e-3;
  double embedding = 1e-2;
};

void optimizer_step(ModelState& state, const Gradients& grads, const LearningRates& rates);

struct TrainLogEntry {
  int epoch = 0;
  double elbo = 0.0;
  double valid_r2 = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelState state;
  std::vector<TrainLogEntry> log;
  int best_epoch = 0;
  double best_valid_r2 = 0.0;
  int stopped_epoch = 0;
  double mean_iteration_ms = 0.0;
};

TrainResult train(const TrainConfig& cfg, const LongitudinalDataset& train_data,
                  const LongitudinalDataset& valid_data);

}  // namespace ldkgp

#endif
