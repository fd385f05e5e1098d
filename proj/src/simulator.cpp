#include "ldkgp/simulator.hpp"

#include <cmath>

#include "ldkgp/linalg.hpp"

namespace ldkgp {

void SimulationSpec::validate() const {
  if (individuals < 1 || observations < 1 || covariates < 1 || base_dim < 1)
    throw InvalidSpec("simulation sizes must be >= 1");
  if (clusters == 1 || clusters < 0)
    throw InvalidSpec("clusters must be 0 (none) or >= 2");
  if (!(ar_decay >= 0.0 && ar_decay < 1.0))
    throw InvalidSpec("ar_decay must lie in [0, 1)");
  if (!(residual_scale >= 0.0)) throw InvalidSpec("residual_scale must be >= 0");
  if (!(signal_scale > 0.0)) throw InvalidSpec("signal_scale must be > 0");
}

namespace {

std::vector<int> cluster_assignment(const SimulationSpec& spec) {
  std::vector<int> labels(spec.individuals, 0);
  if (spec.clusters >= 2) {
    // contiguous balanced blocks of individuals
    for (int i = 0; i < spec.individuals; ++i)
      labels[i] = static_cast<int>((static_cast<long>(i) * spec.clusters) / spec.individuals);
  }
  return labels;
}

Matrix uniform_net_weights(Index rows, Index cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
  return w;
}

}  // namespace

Matrix build_covariance(const SimulationSpec& spec) {
  spec.validate();
  const Index n = spec.n_rows();
  Matrix sigma = Matrix::Zero(n, n);
  for (int i = 0; i < spec.individuals; ++i) {
    const Index off = static_cast<Index>(i) * spec.observations;
    for (Index t = 0; t < spec.observations; ++t)
      for (Index q = 0; q < spec.observations; ++q)
        sigma(off + t, off + q) = std::pow(spec.ar_decay, std::abs(double(t - q)));
  }
  if (spec.clusters >= 2) {
    const auto labels = cluster_assignment(spec);
    for (Index a = 0; a < n; ++a) {
      const int la = labels[static_cast<std::size_t>(a) / spec.observations];
      for (Index b = 0; b < n; ++b) {
        const int lb = labels[static_cast<std::size_t>(b) / spec.observations];
        if (la == lb) sigma(a, b) += 1.0;
      }
    }
  }
  return sigma * (spec.residual_scale * spec.residual_scale);
}

Vector sample_residual(const Matrix& covariance, std::mt19937_64& rng) {
  const Matrix chol = cholesky_lower<double>(add_jitter<double>(covariance, 1e-6));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector eps(covariance.rows());
  for (Index i = 0; i < eps.size(); ++i) eps(i) = gauss(rng);
  return chol * eps;
}

SimulationResult generate(const SimulationSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Index n = spec.n_rows();

  // base features ~ U[0,1)
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix base(n, spec.base_dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < spec.base_dim; ++j) base(i, j) = unif(rng);

  // covariate network: base_dim - 100 - Tanh - Dropout(0.7) - BatchNorm -
  // P - Tanh, with the stochastic layers realized once at generation.
  const Index hidden = 100;
  const Matrix w1 = uniform_net_weights(hidden, spec.base_dim, rng);
  const Matrix w2 = uniform_net_weights(spec.covariates, hidden, rng);
  Matrix h = (base * w1.transpose()).array().tanh();
  const double keep = 0.3;
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) h(i, j) *= unif(rng) < keep ? 1.0 / keep : 0.0;
  for (Index j = 0; j < h.cols(); ++j) {
    const double mean = h.col(j).mean();
    const double sd = std::sqrt((h.col(j).array() - mean).square().sum() / h.rows());
    h.col(j) = (h.col(j).array() - mean) / std::max(sd, 1e-12);
  }
  Matrix x = (h * w2.transpose()).array().tanh();

  // outcome network P - 100 - Tanh - 1, signal standardized to the
  // configured scale
  const Matrix v1 = uniform_net_weights(hidden, spec.covariates, rng);
  const Matrix v2 = uniform_net_weights(1, hidden, rng);
  Vector f = ((x * v1.transpose()).array().tanh().matrix() * v2.transpose()).col(0);
  const double f_mean = f.mean();
  const double f_sd = std::sqrt((f.array() - f_mean).square().sum() / f.size());
  f = (f.array() - f_mean) / std::max(f_sd, 1e-12) * spec.signal_scale;

  SimulationResult out;
  out.truth.residual_covariance = build_covariance(spec);
  const Vector eps = sample_residual(out.truth.residual_covariance, rng);
  out.truth.signal = f;
  out.truth.cluster_of_individual = cluster_assignment(spec);

  auto& data = out.data;
  data.covariates = std::move(x);
  data.outcome = f + eps;
  data.time.resize(n);
  data.individual.resize(n);
  for (int i = 0; i < spec.individuals; ++i) {
    for (int t = 0; t < spec.observations; ++t) {
      const Index r = static_cast<Index>(i) * spec.observations + t;
      data.time(r) = static_cast<double>(t);
      data.individual[static_cast<std::size_t>(r)] = i + 1;
    }
    data.id_labels.push_back(std::to_string(i + 1));
  }
  for (Index c = 0; c < spec.covariates; ++c)
    data.column_names.push_back("x" + std::to_string(c + 1));
  data.column_kinds.assign(spec.covariates, ColumnKind::Continuous);
  data.category_codes.assign(spec.covariates, {});
  data.validate();
  return out;
}

}  // namespace ldkgp
