#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "ldkgp/predictor.hpp"
#include "ldkgp/simulator.hpp"
#include "testutil.hpp"

using namespace ldkgp;

namespace {

ModelState random_state(const LongitudinalDataset& data, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.latent_dim_v = 3;
  cfg.latent_dim_i = 3;
  cfg.hidden_dim = 4;
  cfg.inducing_count = 4;
  cfg.seed = seed;
  std::mt19937_64 rng(seed);
  ModelState st = init_state(cfg, data, rng);
  st.posterior.mu_q = testutil::random_vector(4, rng);
  Matrix l = testutil::random_matrix(4, 4, rng, 0.2);
  st.posterior.l_q = l.triangularView<Eigen::StrictlyLower>();
  for (Index j = 0; j < 4; ++j) st.posterior.l_q(j, j) = 0.5;
  return st;
}

}  // namespace

TEST_CASE("zero posterior mean gives zero predictions") {
  std::mt19937_64 rng(1);
  const auto data = testutil::random_dataset(10, 4, 3, rng);
  auto st = random_state(data, 2);
  st.posterior.mu_q.setZero();
  const auto res = predict(st, data);
  CHECK(res.mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vanishing cross-kernel recovers the prior covariance") {
  std::mt19937_64 rng(2);
  const auto data = testutil::random_dataset(8, 4, 2, rng);
  auto st = random_state(data, 3);
  // push the inducing points far away so K_*Z ~ 0
  st.z.z.array() += 100.0;
  sync_inducing_embeddings(st.kernel.embeddings, st.z);
  const auto res = predict(st, data);
  CHECK(res.mean.cwiseAbs().maxCoeff() < 1e-10);
  std::mt19937_64 r(0);
  const Matrix prior = gram_xx(st.kernel, data, r) * st.outcome_scale * st.outcome_scale;
  CHECK((res.covariance - prior).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("prediction matches a dense evaluation of the formula") {
  std::mt19937_64 rng(3);
  const auto data = testutil::random_dataset(12, 4, 3, rng);
  const auto st = random_state(data, 4);
  const auto res = predict(st, data);

  // direct dense evaluation with an explicit inverse
  std::mt19937_64 r(0);
  GramCache cache;
  KernelMatrices km = gram(st.kernel, data, st.z, PassMode::Eval, r, &cache, true);
  km.jitter = st.config.jitter;
  Matrix s = kzz_effective(km);
  s.diagonal().array() += st.noise.sigma2();
  const Matrix sinv = s.inverse();
  const Vector mean = km.kxz * sinv * st.posterior.mu_q;
  const Matrix cov = *km.kxx - km.kxz * sinv * km.kxz.transpose();
  CHECK((res.mean - mean * st.outcome_scale).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((res.covariance - cov * st.outcome_scale * st.outcome_scale)
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("predictive covariance is positive semidefinite") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 20);
    const auto data = testutil::random_dataset(n, 3, 3, rng);
    const auto st = random_state(data, 100 + trial);
    const auto res = predict(st, data);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(res.covariance);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
    for (Index i = 0; i < n; ++i) CHECK(res.covariance(i, i) >= -1e-8);
  }
}

TEST_CASE("observation-space variance adds sigma^2 on the diagonal") {
  std::mt19937_64 rng(5);
  const auto data = testutil::random_dataset(6, 3, 2, rng);
  const auto st = random_state(data, 6);
  const auto latent = predict(st, data);
  PredictOptions opts;
  opts.observation_noise = true;
  const auto obs = predict(st, data, opts);
  const double expected = st.noise.sigma2() * st.outcome_scale * st.outcome_scale;
  for (Index i = 0; i < 6; ++i)
    CHECK(obs.covariance(i, i) - latent.covariance(i, i) ==
          doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("prediction is equivariant under row permutation") {
  std::mt19937_64 rng(6);
  const auto data = testutil::random_dataset(9, 4, 3, rng);
  const auto st = random_state(data, 7);
  const auto base = predict(st, data);

  std::vector<Index> perm = {4, 0, 8, 2, 6, 1, 7, 3, 5};
  const auto permuted = predict(st, data.subset(perm));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK(permuted.mean(static_cast<Index>(i)) ==
          doctest::Approx(base.mean(perm[i])).epsilon(1e-12));
    for (std::size_t j = 0; j < perm.size(); ++j)
      CHECK(permuted.covariance(static_cast<Index>(i), static_cast<Index>(j)) ==
            doctest::Approx(base.covariance(perm[i], perm[j])).epsilon(1e-12));
  }
}

TEST_CASE("unseen individuals error unless the fallback is enabled") {
  std::mt19937_64 rng(7);
  const auto data = testutil::random_dataset(6, 3, 2, rng);
  const auto st = random_state(data, 8);
  auto test = data;
  test.individual[0] = 0;  // marker for an unknown id
  CHECK_THROWS_AS(predict(st, test), UnknownEntity);
  CHECK_NOTHROW(predict_mean(st, test, true));
}

TEST_CASE("correlation matrix has a unit diagonal and bounded entries") {
  std::mt19937_64 rng(8);
  const auto data = testutil::random_dataset(15, 3, 4, rng);
  const auto st = random_state(data, 9);
  const Matrix corr = correlation_matrix(st, data);
  for (Index i = 0; i < corr.rows(); ++i) {
    CHECK(corr(i, i) == 1.0);
    for (Index j = 0; j < corr.cols(); ++j) {
      CHECK(corr(i, j) >= -1.0 - 1e-10);
      CHECK(corr(i, j) <= 1.0 + 1e-10);
    }
  }
}

TEST_CASE("identical rows correlate perfectly") {
  std::mt19937_64 rng(9);
  auto data = testutil::random_dataset(6, 3, 2, rng);
  data.covariates.row(1) = data.covariates.row(0);
  data.individual[1] = data.individual[0];
  const auto st = random_state(data, 10);
  const Matrix corr = correlation_matrix(st, data);
  CHECK(corr(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("correlation export enforces the size cap") {
  std::mt19937_64 rng(10);
  const auto data = testutil::random_dataset(30, 3, 3, rng);
  const auto st = random_state(data, 11);
  CorrelationOptions opts;
  opts.size_cap = 20;
  CHECK_THROWS_AS(correlation_matrix(st, data, opts), SizeCapExceeded);
}

TEST_CASE("r_squared reference values") {
  Vector a(4);
  a << 1, 2, 3, 4;
  CHECK(r_squared(a, a) == doctest::Approx(1.0));
  CHECK(r_squared(Vector::Constant(4, a.mean()), a) == doctest::Approx(0.0));
  Vector bad(4);
  bad << 10, -10, 10, -10;
  CHECK(r_squared(bad, a) < 0.0);
  CHECK_THROWS_AS(r_squared(a, Vector::Constant(4, 2.0)), DegenerateTarget);
  CHECK_THROWS_AS(r_squared(a, Vector::Zero(3)), ShapeMismatch);
}

TEST_CASE("training-set fit exceeds test-set fit on ample noiseless data") {
  // soft sanity direction, not a theorem
  SimulationSpec spec;
  spec.individuals = 8;
  spec.observations = 10;
  spec.covariates = 5;
  spec.base_dim = 3;
  spec.residual_scale = 0.05;
  spec.seed = 12;
  const auto sim = generate(spec);
  std::mt19937_64 rng(1);
  const auto parts = split(sim.data, {0.5, 0.2, 0.3}, rng);
  TrainConfig cfg;
  cfg.latent_dim_v = 4;
  cfg.latent_dim_i = 4;
  cfg.hidden_dim = 8;
  cfg.inducing_count = 6;
  cfg.max_epochs = 60;
  cfg.patience = 1000;
  cfg.train_dropout = false;
  const auto tr = sim.data.subset(parts.train);
  const auto va = sim.data.subset(parts.valid);
  const auto te = sim.data.subset(parts.test);
  const auto result = train(cfg, tr, va);
  const double train_r2 = r_squared(predict_mean(result.state, tr), tr.outcome);
  const double test_r2 = r_squared(predict_mean(result.state, te), te.outcome);
  CHECK(train_r2 > test_r2 - 0.05);
}
