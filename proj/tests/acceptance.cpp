// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Thresholds are fixed here, not tuned at runtime.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ldkgp/experiment.hpp"
#include "ldkgp/linalg.hpp"
#include "ldkgp/predictor.hpp"
#include "testutil.hpp"

using namespace ldkgp;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d. %s — %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

KernelMatrices random_instance(Index n, Index m, std::mt19937_64& rng) {
  KernelMatrices km;
  km.kzz = testutil::random_pd(m, rng) / static_cast<double>(m);
  km.kxz = testutil::random_matrix(n, m, rng, 0.5);
  km.jitter = 0.0;
  return km;
}

VariationalPosterior random_posterior(Index m, std::mt19937_64& rng) {
  VariationalPosterior post;
  post.mu_q = testutil::random_vector(m, rng);
  Matrix l = testutil::random_matrix(m, m, rng, 0.3);
  post.l_q = l.triangularView<Eigen::StrictlyLower>();
  for (Index j = 0; j < m; ++j)
    post.l_q(j, j) = 0.3 + std::generate_canonical<double, 53>(rng);
  return post;
}

ExperimentConfig desk_config(int clusters, std::uint64_t seed) {
  ExperimentConfig cfg;
  SimulationSpec spec;
  spec.clusters = clusters;
  spec.seed = seed;
  cfg.dataset.simulation = spec;
  cfg.split_seed = seed;
  cfg.train.seed = seed;
  return cfg;
}

std::vector<double> run_setting(int clusters, int runs,
                                const std::function<void(ExperimentConfig&)>& tweak = {}) {
  std::vector<double> r2s;
  for (int seed = 0; seed < runs; ++seed) {
    ExperimentConfig cfg = desk_config(clusters, static_cast<std::uint64_t>(seed));
    cfg.dataset.simulation->seed = static_cast<std::uint64_t>(seed);
    if (tweak) tweak(cfg);
    r2s.push_back(run_fit_once(cfg).test_r2);
  }
  return r2s;
}

// ------------------------------------------------------------------ 1
void criterion_elbo_equivalence() {
  const auto tic = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  bool pass = true;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 26);  // N <= 30
    const Index m = 1 + static_cast<Index>(rng() % 5);   // M <= 5
    const auto km = random_instance(n, m, rng);
    const auto post = random_posterior(m, rng);
    const Vector y = testutil::random_vector(n, rng);
    const NoiseModel noise = NoiseModel::from_sigma2(0.5 + 0.001 * (trial % 7));
    const double cf = elbo_closed_form(km, post, y, noise);
    const auto mc = elbo_monte_carlo(km, post, y, noise, 1000000, rng);
    const double sigmas = std::abs(cf - mc.value) / mc.std_error;
    worst = std::max(worst, sigmas);
    if (sigmas >= 3.0) pass = false;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
  if (secs >= 120.0) pass = false;
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "20 instances, worst gap %.2f MC standard errors, %.1f s", worst, secs);
  report(1, "closed-form ELBO equals the Monte-Carlo estimate", pass, detail);
}

// ------------------------------------------------------------------ 2
void criterion_posterior_stationarity() {
  std::mt19937_64 rng(77);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const Index n = 6 + static_cast<Index>(rng() % 10);
    const Index m = 2 + static_cast<Index>(rng() % 3);
    const auto km = random_instance(n, m, rng);
    const Vector y = testutil::random_vector(n, rng);
    const NoiseModel noise = NoiseModel::from_sigma2(0.9);
    PosteriorOptions opts;
    opts.mode = LqMode::Full;
    auto post = optimal_posterior(km, y, noise, opts);
    for (Index j = 0; j < m; ++j) {
      post.mu_q(j) += h;
      const double up = elbo_closed_form(km, post, y, noise);
      post.mu_q(j) -= 2 * h;
      const double dn = elbo_closed_form(km, post, y, noise);
      post.mu_q(j) += h;
      worst = std::max(worst, std::abs((up - dn) / (2 * h)));
    }
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j <= i; ++j) {
        post.l_q(i, j) += h;
        const double up = elbo_closed_form(km, post, y, noise);
        post.l_q(i, j) -= 2 * h;
        const double dn = elbo_closed_form(km, post, y, noise);
        post.l_q(i, j) += h;
        worst = std::max(worst, std::abs((up - dn) / (2 * h)));
      }
    // diagonal shortcut: stationary within the diagonal family
    auto diag_post = optimal_posterior(km, y, noise);
    for (Index j = 0; j < m; ++j) {
      diag_post.l_q(j, j) += h;
      const double up = elbo_closed_form(km, diag_post, y, noise);
      diag_post.l_q(j, j) -= 2 * h;
      const double dn = elbo_closed_form(km, diag_post, y, noise);
      diag_post.l_q(j, j) += h;
      worst = std::max(worst, std::abs((up - dn) / (2 * h)));
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "max finite-difference gradient %.2e", worst);
  report(2, "optimal posterior is a stationary point", worst < 1e-5, detail);
}

// ------------------------------------------------------------------ 3
void criterion_gradient_suite() {
  std::mt19937_64 data_rng(31);
  bool pass = true;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    auto data = testutil::random_dataset(14 + 2 * trial, 4, 3, data_rng);  // N <= 20, P <= 5
    TrainConfig cfg;
    cfg.latent_dim_v = 3;
    cfg.latent_dim_i = 3;
    cfg.hidden_dim = 5;
    cfg.inducing_count = 3;  // M <= 3
    cfg.train_dropout = false;
    cfg.seed = 100 + trial;
    std::mt19937_64 rng(cfg.seed);
    ModelState st = init_state(cfg, data, rng);
    st.posterior.mu_q = testutil::random_vector(3, rng, 0.5);
    sync_inducing_embeddings(st.kernel.embeddings, st.z);
    std::mt19937_64 grad_rng(0);
    const Gradients g = elbo_gradients(st, data, 1.0, 1.0, PassMode::Eval, grad_rng);

    const double h = 1e-4;
    auto fd = [&](auto&& bump) {
      ModelState up = st, dn = st;
      bump(up, h);
      bump(dn, -h);
      std::mt19937_64 r1(0), r2(0);
      sync_inducing_embeddings(up.kernel.embeddings, up.z);
      sync_inducing_embeddings(dn.kernel.embeddings, dn.z);
      return (batch_objective(up, data, 1.0, 1.0, PassMode::Eval, r1) -
              batch_objective(dn, data, 1.0, 1.0, PassMode::Eval, r2)) /
             (2 * h);
    };
    auto check = [&](double grad, double fd_val) {
      const double rel = std::abs(grad - fd_val) / std::max(1.0, std::abs(fd_val));
      worst_rel = std::max(worst_rel, rel);
      if (rel > 1e-3) pass = false;
    };
    check(g.alpha_v, fd([](ModelState& s, double d) { s.kernel.alpha_v += d; }));
    check(g.alpha_i, fd([](ModelState& s, double d) { s.kernel.alpha_i += d; }));
    check(g.log_sigma2, fd([](ModelState& s, double d) { s.noise.log_sigma2 += d; }));
    for (Index i = 0; i < st.z.z.rows(); ++i)
      for (Index j = 0; j < st.z.z.cols(); j += 2)
        check(g.z(i, j), fd([i, j](ModelState& s, double d) { s.z.z(i, j) += d; }));
    for (Index i = 0; i < st.kernel.encoder.w1.rows(); i += 2)
      for (Index j = 0; j < st.kernel.encoder.w1.cols(); j += 2)
        check(g.encoder.w1(i, j),
              fd([i, j](ModelState& s, double d) { s.kernel.encoder.w1(i, j) += d; }));
    for (Index i = 0; i < st.kernel.encoder.w3.rows(); ++i)
      check(g.encoder.w3(i, 1),
            fd([i](ModelState& s, double d) { s.kernel.encoder.w3(i, 1) += d; }));
    check(g.encoder.b1(0), fd([](ModelState& s, double d) { s.kernel.encoder.b1(0) += d; }));
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j)
        check(g.embeddings(i, j), fd([i, j](ModelState& s, double d) {
                s.kernel.embeddings.individuals(i, j) += d;
              }));
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "worst relative error %.2e", worst_rel);
  report(3, "encoder and ELBO gradients match finite differences", pass, detail);
}

// ------------------------------------------------------------------ 4
void criterion_simulated_accuracy() {
  struct Row {
    int clusters;
    double threshold;
  };
  const Row rows[] = {{0, 0.80}, {2, 0.85}, {3, 0.90}, {4, 0.90}, {5, 0.90}};
  bool pass = true;
  std::string detail;
  for (const auto& row : rows) {
    const auto tic = std::chrono::steady_clock::now();
    const auto r2s = run_setting(row.clusters, 10);
    const double med = median(r2s);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    if (med < row.threshold || secs >= 600.0) pass = false;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%sC=%d median %.3f (>=%.2f, %.0fs)",
                  detail.empty() ? "" : "; ", row.clusters, med, row.threshold, secs);
    detail += buf;
  }
  report(4, "desk-scale simulated accuracy", pass, detail);
}

// ------------------------------------------------------------------ 5
void criterion_ablations() {
  const int runs = 10;
  const auto full = run_setting(2, runs);
  const auto no_ti = run_setting(2, runs, [](ExperimentConfig& c) {
    c.train.use_time_invariant = false;
  });
  const auto no_tv = run_setting(2, runs, [](ExperimentConfig& c) {
    c.train.use_time_varying = false;
  });
  const auto rbf = run_setting(2, runs, [](ExperimentConfig& c) {
    c.train.bypass_encoder = true;
    c.train.use_time_invariant = false;
  });
  const double m_full = median(full);
  const double m_no_ti = median(no_ti);
  const double m_no_tv = median(no_tv);
  const double m_rbf = median(rbf);
  const bool pass = m_full > m_no_ti && m_full > m_no_tv && m_full > m_rbf;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "full %.3f vs no-time-invariant %.3f, no-time-varying %.3f, rbf-only %.3f",
                m_full, m_no_ti, m_no_tv, m_rbf);
  report(5, "full model beats every ablation on clustered data", pass, detail);
}

// ------------------------------------------------------------------ 6
void criterion_solver_comparison() {
  const int runs = 3;
  const auto closed = run_setting(0, runs);
  const auto sampling = run_setting(0, runs, [](ExperimentConfig& c) {
    c.train.solver = SolverKind::Sampling;
  });
  const double gap = median(closed) - median(sampling);
  char detail[120];
  std::snprintf(detail, sizeof(detail),
                "closed-form %.3f vs sampling %.3f at M=10/300 epochs (gap %.3f >= 0.3)",
                median(closed), median(sampling), gap);
  report(6, "closed-form solver beats the sampling solver", gap >= 0.3, detail);
}

// ------------------------------------------------------------------ 7
void criterion_inducing_plateau() {
  const int runs = 3;
  const auto m10 = run_setting(0, runs);
  const auto m100 = run_setting(0, runs, [](ExperimentConfig& c) {
    c.train.inducing_count = 100;
  });
  const double diff = std::abs(median(m10) - median(m100));
  char detail[96];
  std::snprintf(detail, sizeof(detail), "R2(M=10) %.3f vs R2(M=100) %.3f, |diff| %.3f",
                median(m10), median(m100), diff);
  report(7, "inducing-point plateau", diff < 0.05, detail);
}

// ------------------------------------------------------------------ 8
void criterion_correlation_recovery() {
  bool pass = true;
  std::string detail;
  for (int clusters : {2, 3}) {
    ExperimentConfig cfg = desk_config(clusters, 0);
    const FitOutcome out = run_fit_once(cfg);
    const SimulationResult sim = generate(*cfg.dataset.simulation);
    const LongitudinalDataset pre = apply_preprocess(out.checkpoint.preprocess, sim.data);
    const Matrix corr = correlation_matrix(out.checkpoint.state, pre);
    double within = 0.0, between = 0.0;
    long nw = 0, nb = 0;
    for (Index a = 0; a < corr.rows(); ++a) {
      const int la =
          sim.truth.cluster_of_individual[static_cast<std::size_t>(pre.individual[a]) - 1];
      for (Index b = 0; b < corr.cols(); ++b) {
        if (a == b) continue;
        const int lb =
            sim.truth.cluster_of_individual[static_cast<std::size_t>(pre.individual[b]) - 1];
        (la == lb ? within : between) += corr(a, b);
        ++(la == lb ? nw : nb);
      }
    }
    const double gap = within / nw - between / nb;
    if (gap <= 0.1) pass = false;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%sC=%d gap %.3f", detail.empty() ? "" : "; ",
                  clusters, gap);
    detail += buf;
  }
  report(8, "within-cluster correlation exceeds between-cluster", pass,
         detail + " (> 0.1)");
}

// ------------------------------------------------------------------ 9
void criterion_linear_complexity() {
  const int sizes[] = {10, 20, 40};  // individuals x 20 observations = N in {200,400,800}
  std::vector<double> n_values, times;
  for (int individuals : sizes) {
    ExperimentConfig cfg = desk_config(0, 1);
    cfg.dataset.simulation->individuals = individuals;
    cfg.train.max_epochs = 40;
    cfg.train.early_stop_tolerance = 1e9;  // no early stop while timing
    const FitOutcome out = run_fit_once(cfg);
    n_values.push_back(static_cast<double>(individuals) * 20.0);
    times.push_back(out.training.mean_iteration_ms);
  }
  // least-squares fit t = a + b n and its coefficient of determination
  const double n_mean = (n_values[0] + n_values[1] + n_values[2]) / 3.0;
  const double t_mean = (times[0] + times[1] + times[2]) / 3.0;
  double sxx = 0.0, sxy = 0.0, stt = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxx += (n_values[i] - n_mean) * (n_values[i] - n_mean);
    sxy += (n_values[i] - n_mean) * (times[i] - t_mean);
    stt += (times[i] - t_mean) * (times[i] - t_mean);
  }
  const double slope = sxy / sxx;
  const double intercept = t_mean - slope * n_mean;
  double ss_res = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double fit = intercept + slope * n_values[i];
    ss_res += (times[i] - fit) * (times[i] - fit);
  }
  const double r2_fit = 1.0 - ss_res / stt;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "per-iteration %.2f / %.2f / %.2f ms at N=200/400/800, fit R2 %.3f",
                times[0], times[1], times[2], r2_fit);
  report(9, "per-iteration time grows linearly in N", r2_fit > 0.9 && slope > 0.0,
         detail);
}

// ------------------------------------------------------------------ 10
void criterion_numeric_properties() {
  const auto tic = std::chrono::steady_clock::now();
  std::mt19937_64 rng(404);
  int cases = 0;
  bool pass = true;

  for (int trial = 0; trial < 300; ++trial, ++cases) {  // Cholesky reconstruction
    const Index n = 1 + static_cast<Index>(rng() % 8);
    const Matrix m = testutil::random_pd(n, rng);
    const Matrix l = cholesky_lower<double>(m);
    if ((l * l.transpose() - m).cwiseAbs().maxCoeff() >= 1e-8) pass = false;
  }
  for (int trial = 0; trial < 300; ++trial, ++cases) {  // triangular solve residual
    const Index n = 1 + static_cast<Index>(rng() % 6);
    const Matrix u = cholesky_lower<double>(testutil::random_pd(n, rng));
    const Matrix c = cholesky_lower<double>(testutil::random_pd(n, rng));
    if ((solve_lq<double>(u, c) * c - u).cwiseAbs().maxCoeff() >= 1e-8) pass = false;
  }
  for (int trial = 0; trial < 200; ++trial, ++cases) {  // PSD solve residual
    const Index n = 2 + static_cast<Index>(rng() % 7);
    const Matrix m = testutil::random_pd(n, rng);
    const Matrix rhs = testutil::random_matrix(n, 2, rng);
    if ((m * solve_psd<double>(m, rhs) - rhs).cwiseAbs().maxCoeff() >= 1e-8) pass = false;
  }
  for (int trial = 0; trial < 200; ++trial, ++cases) {  // KL nonnegativity
    const Index m = 1 + static_cast<Index>(rng() % 5);
    const auto km = random_instance(4, m, rng);
    if (kl_term(km, random_posterior(m, rng)) < -1e-10) pass = false;
  }
  std::mt19937_64 eval_rng(0);
  for (int trial = 0; trial < 100; ++trial, ++cases) {  // kernel PSD
    KernelParams kp;
    kp.alpha_v = 0.5 + std::generate_canonical<double, 53>(rng);
    kp.alpha_i = 0.5 + std::generate_canonical<double, 53>(rng);
    kp.encoder = init_encoder({3, 4, 3, 0.2}, rng);
    kp.embeddings = init_embeddings(4, 3, rng);
    const Index n = 3 + static_cast<Index>(rng() % 18);
    const auto d = testutil::random_dataset(n, 3, 4, rng);
    const Matrix kxx = gram_xx(kp, d, eval_rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (kxx + kxx.transpose()));
    if (eig.eigenvalues().minCoeff() < -1e-8) pass = false;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
  if (secs >= 60.0 || cases < 1000) pass = false;
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%d randomized cases in %.1f s", cases, secs);
  report(10, "numeric property suites", pass, detail);
}

}  // namespace

int main() {
  criterion_elbo_equivalence();
  criterion_posterior_stationarity();
  criterion_gradient_suite();
  criterion_simulated_accuracy();
  criterion_ablations();
  criterion_solver_comparison();
  criterion_inducing_plateau();
  criterion_correlation_recovery();
  criterion_linear_complexity();
  criterion_numeric_properties();
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
