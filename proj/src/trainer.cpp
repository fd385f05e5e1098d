#include "ldkgp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ldkgp/linalg.hpp"
#include "ldkgp/predictor.hpp"

namespace ldkgp {

void TrainConfig::validate() const {
  if (latent_dim_v < 1 || latent_dim_i < 1 || hidden_dim < 1 || inducing_count < 1)
    throw InvalidConfig("latent/hidden/inducing sizes must be >= 1");
  if (grad_steps < 0) throw InvalidConfig("grad_steps must be >= 0");
  if (!(learning_rate > 0) || !(embedding_rate > 0))
    throw InvalidConfig("learning rates must be positive");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (max_epochs < 1) throw InvalidConfig("max_epochs must be >= 1");
  if (patience < 1) throw InvalidConfig("patience must be >= 1");
  if (!(jitter >= 0)) throw InvalidConfig("jitter must be >= 0");
  if (mc_samples < 1) throw InvalidConfig("mc_samples must be >= 1");
  if (!use_time_varying && !use_time_invariant)
    throw InvalidConfig("at least one kernel component must be active");
}

ModelState init_state(const TrainConfig& cfg, const LongitudinalDataset& data,
                      std::mt19937_64& rng) {
  cfg.validate();
  if (data.n_rows() == 0) throw DataError("init_state: empty dataset");
  ModelState st;
  st.config = cfg;
  st.kernel.alpha_v = cfg.use_time_varying ? 1.0 : 0.0;
  st.kernel.alpha_i = cfg.use_time_invariant ? 1.0 : 0.0;
  st.kernel.bypass_encoder = cfg.bypass_encoder;
  st.noise = NoiseModel{0.0};  // sigma^2 = 1

  EncoderConfig ec;
  ec.input_dim = data.n_cols();
  ec.hidden_dim = cfg.hidden_dim;
  ec.latent_dim = cfg.latent_dim_v;
  st.kernel.encoder = init_encoder(ec, rng);

  st.kernel.embeddings = init_embeddings(data.n_individuals(), cfg.latent_dim_i, rng);

  const Index dim_v = cfg.bypass_encoder ? data.n_cols() : cfg.latent_dim_v;
  st.z = init_inducing(cfg.inducing_count, dim_v, cfg.latent_dim_i, rng);
  sync_inducing_embeddings(st.kernel.embeddings, st.z);

  st.posterior.mu_q = Vector::Zero(cfg.inducing_count);
  st.posterior.l_q = Matrix::Identity(cfg.inducing_count, cfg.inducing_count);
  return st;
}

namespace {

struct BatchTerms {
  double objective = 0.0;
  Matrix kxz_bar;  // N x M
  Matrix kzz_bar;  // M x M, symmetrized
  double g_log_sigma2 = 0.0;
  Vector g_mu;   // sampling solver only
  Matrix g_lq;   // sampling solver only
};

// Shared forward/adjoint core for both solvers: computes the batch
// objective and the cotangents w.r.t. the kernel matrices.
BatchTerms batch_terms(const ModelState& state, const KernelMatrices& km,
                       const Vector& y, double data_scale,
                       double kl_weight, std::mt19937_64* sample_rng) {
  const double s2 = state.noise.sigma2();
  const Index n = y.size();
  const Index m = km.kzz.rows();
  const Matrix kzz = kzz_effective(km);
  const Matrix chol = cholesky_lower<double>(kzz);
  const Matrix a = solve_with_chol<double>(chol, km.kxz.transpose()).transpose();
  const Vector& mu = state.posterior.mu_q;
  const Matrix& lq = state.posterior.l_q;

  BatchTerms out;
  double q_term;            // expected squared residual
  Matrix abar(n, m);        // cotangent of A
  if (sample_rng == nullptr) {
    const Vector resid = y - a * mu;
    const Matrix g = a * lq;
    q_term = resid.squaredNorm() + g.squaredNorm();
    abar = (data_scale / s2) * (resid * mu.transpose() - g * lq.transpose());
  } else {
    const Index s_count = state.config.mc_samples;
    std::normal_distribution<double> gauss(0.0, 1.0);
    q_term = 0.0;
    abar.setZero();
    Vector mean_resid = Vector::Zero(n);
    out.g_lq = Matrix::Zero(m, m);
    Vector eps(m);
    for (Index s = 0; s < s_count; ++s) {
      for (Index j = 0; j < m; ++j) eps(j) = gauss(*sample_rng);
      const Vector u = mu + lq * eps;
      const Vector resid = y - a * u;
      q_term += resid.squaredNorm();
      abar += resid * u.transpose();
      mean_resid += resid;
      out.g_lq += (a.transpose() * resid) * eps.transpose();
    }
    const double inv_s = 1.0 / static_cast<double>(s_count);
    q_term *= inv_s;
    abar *= data_scale / s2 * inv_s;
    mean_resid *= inv_s;
    out.g_lq *= data_scale / s2 * inv_s;
    out.g_mu = (data_scale / s2) * (a.transpose() * mean_resid);
  }

  const double data_term =
      data_scale * (-0.5 * static_cast<double>(n) * std::log(s2) - q_term / (2 * s2));
  const double kl = kl_term(km, state.posterior);
  out.objective = data_term - kl_weight * kl;
  if (!std::isfinite(out.objective))
    throw NonFiniteValue("batch objective is not finite");

  out.g_log_sigma2 = data_scale * (-0.5 * static_cast<double>(n) + q_term / (2 * s2));

  out.kxz_bar = solve_with_chol<double>(chol, abar.transpose()).transpose();
  Matrix kzz_bar = -a.transpose() * out.kxz_bar;
  // KL dependence on K_ZZ
  const Matrix kzz_inv = solve_with_chol<double>(chol, Matrix::Identity(m, m));
  const Matrix wl = solve_with_chol<double>(chol, lq);
  const Vector wm = solve_with_chol<double>(chol, Matrix(mu)).col(0);
  kzz_bar += kl_weight * (-0.5 * kzz_inv + 0.5 * (wl * wl.transpose() + wm * wm.transpose()));
  out.kzz_bar = symmetrize<double>(kzz_bar);

  if (sample_rng != nullptr) {
    // KL gradients for the variational parameters
    out.g_mu -= kl_weight * (kzz_inv * mu);
    Matrix kl_l = kzz_inv * lq;
    for (Index j = 0; j < m; ++j) kl_l(j, j) -= 1.0 / lq(j, j);
    out.g_lq -= kl_weight * kl_l;
    out.g_lq = out.g_lq.triangularView<Eigen::Lower>();
  }
  return out;
}

Gradients kernel_gradients(const ModelState& state, const GramCache& cache,
                           const BatchTerms& terms) {
  const double av = state.kernel.alpha_v;
  const double ai = state.kernel.alpha_i;
  const Index dv = state.z.dim_v;
  const Index di = state.z.dim_i();
  const auto zv = state.z.block_v();
  const auto zi = state.z.block_i();

  Gradients g;
  g.alpha_v = 2.0 * av * (terms.kxz_bar.cwiseProduct(cache.kxz_v).sum() +
                          terms.kzz_bar.cwiseProduct(cache.kzz_v).sum());
  g.alpha_i = 2.0 * ai * (terms.kxz_bar.cwiseProduct(cache.kxz_i).sum() +
                          terms.kzz_bar.cwiseProduct(cache.kzz_i).sum());
  g.log_sigma2 = terms.g_log_sigma2;

  const Matrix wv = terms.kxz_bar.cwiseProduct(av * av * cache.kxz_v);
  const Matrix wi = terms.kxz_bar.cwiseProduct(ai * ai * cache.kxz_i);
  const Matrix sv = terms.kzz_bar.cwiseProduct(av * av * cache.kzz_v);
  const Matrix si = terms.kzz_bar.cwiseProduct(ai * ai * cache.kzz_i);

  g.z = Matrix::Zero(state.z.count(), dv + di);
  g.z.leftCols(dv) = wv.transpose() * cache.latents -
                     wv.colwise().sum().transpose().asDiagonal() * Matrix(zv);
  g.z.rightCols(di) = wi.transpose() * cache.embed_rows -
                      wi.colwise().sum().transpose().asDiagonal() * Matrix(zi);
  g.z.leftCols(dv) += 2.0 * (sv * zv - sv.rowwise().sum().asDiagonal() * Matrix(zv));
  g.z.rightCols(di) += 2.0 * (si * zi - si.rowwise().sum().asDiagonal() * Matrix(zi));

  if (!state.kernel.bypass_encoder && state.config.use_time_varying) {
    const Matrix latent_bar =
        wv * zv - wv.rowwise().sum().asDiagonal() * cache.latents;
    g.encoder = encode_backward(state.kernel.encoder, cache.encoder, latent_bar);
  } else {
    g.encoder.setZero(state.kernel.encoder, static_cast<Index>(cache.ids.size()));
  }

  const Matrix embed_bar = wi * zi - wi.rowwise().sum().asDiagonal() * cache.embed_rows;
  g.embeddings = Matrix::Zero(state.kernel.embeddings.n_individuals(),
                              state.kernel.embeddings.dim());
  for (std::size_t r = 0; r < cache.ids.size(); ++r)
    g.embeddings.row(cache.ids[r] - 1) += embed_bar.row(static_cast<Index>(r));
  return g;
}

void adam_update(AdamState& opt, const std::string& key, Eigen::Ref<Matrix> param,
                 const Matrix& grad, double lr, double weight_decay) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (!grad.allFinite()) throw NonFiniteValue("gradient for '" + key + "' is not finite");
  Matrix g = grad;
  if (weight_decay != 0.0) g -= weight_decay * param;
  auto& m1 = opt.m1[key];
  auto& m2 = opt.m2[key];
  if (m1.size() == 0) {
    m1 = Matrix::Zero(param.rows(), param.cols());
    m2 = Matrix::Zero(param.rows(), param.cols());
  }
  m1 = beta1 * m1 + (1 - beta1) * g;
  m2 = beta2 * m2 + (1 - beta2) * g.cwiseProduct(g);
  const double c1 = 1 - std::pow(beta1, static_cast<double>(opt.t));
  const double c2 = 1 - std::pow(beta2, static_cast<double>(opt.t));
  // gradient ascent on the ELBO
  param += (lr * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
}

void adam_scalar(AdamState& opt, const std::string& key, double& param, double grad,
                 double lr, double weight_decay) {
  Matrix p(1, 1);
  p(0, 0) = param;
  Matrix g(1, 1);
  g(0, 0) = grad;
  adam_update(opt, key, p, g, lr, weight_decay);
  param = p(0, 0);
}

}  // namespace

double batch_objective(const ModelState& state, const LongitudinalDataset& batch,
                       double data_scale, double kl_weight, PassMode mode,
                       std::mt19937_64& rng) {
  GramCache cache;
  KernelMatrices km = gram(state.kernel, batch, state.z, mode, rng, &cache);
  km.jitter = state.config.jitter;
  return batch_terms(state, km, batch.outcome, data_scale, kl_weight, nullptr)
      .objective;
}

Gradients elbo_gradients(const ModelState& state, const LongitudinalDataset& batch,
                         double data_scale, double kl_weight, PassMode mode,
                         std::mt19937_64& rng) {
  GramCache cache;
  KernelMatrices km = gram(state.kernel, batch, state.z, mode, rng, &cache);
  km.jitter = state.config.jitter;
  const bool sampling = state.config.solver == SolverKind::Sampling;
  BatchTerms terms =
      batch_terms(state, km, batch.outcome, data_scale, kl_weight,
                  sampling ? &rng : nullptr);
  Gradients g = kernel_gradients(state, cache, terms);
  if (sampling) {
    g.mu_q = terms.g_mu;
    g.l_q = terms.g_lq;
  }
  return g;
}

void optimizer_step(ModelState& state, const Gradients& grads, const LearningRates& rates) {
  auto& opt = state.opt;
  const double wd = state.config.weight_decay;
  opt.t += 1;
  if (state.config.use_time_varying)
    adam_scalar(opt, "alpha_v", state.kernel.alpha_v, grads.alpha_v, rates.base, wd);
  if (state.config.use_time_invariant)
    adam_scalar(opt, "alpha_i", state.kernel.alpha_i, grads.alpha_i, rates.base, wd);
  adam_scalar(opt, "log_sigma2", state.noise.log_sigma2, grads.log_sigma2, rates.base, wd);
  adam_update(opt, "z", state.z.z, grads.z, rates.base, wd);
  if (state.config.use_time_invariant)
    adam_update(opt, "embeddings", state.kernel.embeddings.individuals, grads.embeddings,
                rates.embedding, wd);
  if (!state.kernel.bypass_encoder && state.config.use_time_varying) {
    adam_update(opt, "enc_w1", state.kernel.encoder.w1, grads.encoder.w1, rates.base, wd);
    adam_update(opt, "enc_w2", state.kernel.encoder.w2, grads.encoder.w2, rates.base, wd);
    adam_update(opt, "enc_w3", state.kernel.encoder.w3, grads.encoder.w3, rates.base, wd);
    adam_update(opt, "enc_b1", state.kernel.encoder.b1, grads.encoder.b1, rates.base, wd);
    adam_update(opt, "enc_b2", state.kernel.encoder.b2, grads.encoder.b2, rates.base, wd);
    adam_update(opt, "enc_b3", state.kernel.encoder.b3, grads.encoder.b3, rates.base, wd);
  }
  if (state.config.solver == SolverKind::Sampling && grads.mu_q.size() > 0) {
    Matrix mu = state.posterior.mu_q;
    adam_update(opt, "mu_q", mu, Matrix(grads.mu_q), rates.base, wd);
    state.posterior.mu_q = mu.col(0);
    // diagonal in log space (positivity), strict lower triangle directly
    Matrix& lq = state.posterior.l_q;
    const Index m = lq.rows();
    Matrix log_diag(m, 1), g_log_diag(m, 1);
    for (Index j = 0; j < m; ++j) {
      log_diag(j, 0) = std::log(lq(j, j));
      g_log_diag(j, 0) = grads.l_q(j, j) * lq(j, j);
    }
    adam_update(opt, "lq_log_diag", log_diag, g_log_diag, rates.base, wd);
    Matrix strict = lq.triangularView<Eigen::StrictlyLower>();
    Matrix g_strict = grads.l_q.triangularView<Eigen::StrictlyLower>();
    adam_update(opt, "lq_lower", strict, g_strict, rates.base, wd);
    lq = strict.triangularView<Eigen::StrictlyLower>();
    for (Index j = 0; j < m; ++j) lq(j, j) = std::exp(log_diag(j, 0));
  }
  sync_inducing_embeddings(state.kernel.embeddings, state.z);
}

namespace {

std::vector<std::vector<Index>> make_batches(Index n, Index batch_size,
                                             std::mt19937_64& rng) {
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> batches;
  for (Index start = 0; start < n; start += batch_size) {
    const Index stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

struct BestSnapshot {
  bool set = false;
  double valid_r2 = -std::numeric_limits<double>::infinity();
  int epoch = 0;
  KernelParams kernel;
  InducingPoints z;
  NoiseModel noise;
  VariationalPosterior posterior;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const LongitudinalDataset& train_data,
                  const LongitudinalDataset& valid_data) {
  cfg.validate();
  if (train_data.n_rows() == 0 || valid_data.n_rows() == 0)
    throw DataError("train: empty split");
  if (train_data.n_cols() != valid_data.n_cols())
    throw ShapeMismatch("train: covariate dimensions differ between splits");

  std::mt19937_64 rng(cfg.seed);
  ModelState state = init_state(cfg, train_data, rng);

  // Outcomes are normalized to unit train variance internally so the
  // unit-scale initialization of sigma^2 and the alphas starts in range;
  // predictions are mapped back through outcome_scale.
  const double mean = train_data.outcome.mean();
  const double sd =
      std::sqrt((train_data.outcome.array() - mean).square().sum() / train_data.n_rows());
  state.outcome_scale = sd > 0 ? sd : 1.0;
  LongitudinalDataset tr = train_data;
  tr.outcome /= state.outcome_scale;
  // validation stays in original units; predictions are mapped back
  const LongitudinalDataset& va = valid_data;

  const Index n = tr.n_rows();
  const double n_full = static_cast<double>(n);

  TrainResult result;
  BestSnapshot best;
  double prev_r2 = -std::numeric_limits<double>::infinity();
  int consecutive_drops = 0;
  bool jitter_escalated = false;
  double total_ms = 0.0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    state.epoch = epoch;
    double epoch_elbo = 0.0;
    for (int attempt = 0;; ++attempt) {
      try {
        sync_inducing_embeddings(state.kernel.embeddings, state.z);
        if (cfg.solver == SolverKind::ClosedForm) {
          GramCache cache;
          KernelMatrices km = gram(state.kernel, tr, state.z, PassMode::Eval, rng, &cache);
          km.jitter = state.config.jitter;
          double elbo_before = 0.0;
          if (cfg.check_posterior_improves)
            elbo_before = elbo_closed_form(km, state.posterior, tr.outcome, state.noise);
          state.posterior =
              optimal_posterior(km, tr.outcome, state.noise, state.posterior_options());
          epoch_elbo = elbo_closed_form(km, state.posterior, tr.outcome, state.noise);
          if (cfg.check_posterior_improves && epoch_elbo < elbo_before - 1e-9)
            throw NumericError("posterior update decreased the ELBO: " +
                               std::to_string(elbo_before) + " -> " +
                               std::to_string(epoch_elbo));
        } else {
          epoch_elbo = batch_objective(state, tr, 1.0, 1.0, PassMode::Eval, rng);
        }
        break;
      } catch (const NotPositiveDefinite&) {
        if (jitter_escalated || attempt > 0) throw;
        jitter_escalated = true;
        state.config.jitter *= 10.0;
      }
    }

    const Vector valid_pred = predict_mean(state, va);
    const double valid_r2 = r_squared(valid_pred, va.outcome);

    if (valid_r2 > best.valid_r2) {
      best.set = true;
      best.valid_r2 = valid_r2;
      best.epoch = epoch;
      best.kernel = state.kernel;
      best.z = state.z;
      best.noise = state.noise;
      best.posterior = state.posterior;
    }

    bool stop = false;
    if (valid_r2 < prev_r2 - cfg.early_stop_tolerance) {
      if (++consecutive_drops >= cfg.patience) stop = true;
    } else {
      consecutive_drops = 0;
    }
    prev_r2 = valid_r2;

    if (!stop) {
      if (cfg.solver == SolverKind::ClosedForm) {
        for (int t = 0; t < cfg.grad_steps; ++t) {
          const auto batches = make_batches(n, cfg.batch_size, rng);
          const double kl_weight = 1.0 / static_cast<double>(batches.size());
          for (const auto& rows : batches) {
            LongitudinalDataset batch = tr.subset(rows);
            const double scale = n_full / static_cast<double>(rows.size());
            Gradients g = elbo_gradients(state, batch, scale, kl_weight,
                                         cfg.train_dropout ? PassMode::Train
                                                           : PassMode::Eval,
                                         rng);
            optimizer_step(state, g, {cfg.learning_rate, cfg.embedding_rate});
          }
        }
      } else {
        // vanilla stochastic solver: one pass of minibatch steps per epoch,
        // variational parameters updated by sampled gradients
        const auto batches = make_batches(n, cfg.batch_size, rng);
        const double kl_weight = 1.0 / static_cast<double>(batches.size());
        for (const auto& rows : batches) {
          LongitudinalDataset batch = tr.subset(rows);
          const double scale = n_full / static_cast<double>(rows.size());
          Gradients g = elbo_gradients(state, batch, scale, kl_weight,
                                       cfg.train_dropout ? PassMode::Train
                                                         : PassMode::Eval,
                                       rng);
          optimizer_step(state, g, {cfg.learning_rate, cfg.embedding_rate});
        }
      }
    }

    const auto toc = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(toc - tic).count();
    total_ms += ms;
    result.log.push_back({epoch, epoch_elbo, valid_r2, ms});
    result.stopped_epoch = epoch;
    if (stop) break;
  }

  if (best.set) {
    state.kernel = best.kernel;
    state.z = best.z;
    state.noise = best.noise;
    state.posterior = best.posterior;
    sync_inducing_embeddings(state.kernel.embeddings, state.z);
  }
  result.best_epoch = best.epoch;
  result.best_valid_r2 = best.valid_r2;
  result.mean_iteration_ms = total_ms / std::max<std::size_t>(1, result.log.size());
  result.state = std::move(state);
  return result;
}

}  // namespace ldkgp
