#include "ldkgp/encoder.hpp"

#include <cmath>

namespace ldkgp {

double celu(double x, double alpha) {
  if (x >= 0.0) return x;
  return alpha * std::expm1(x / alpha);
}

double celu_derivative(double x, double alpha) {
  if (x >= 0.0) return 1.0;
  return std::exp(x / alpha);
}

namespace {

Matrix uniform_weights(Index rows, Index cols, std::mt19937_64& rng) {
  // +-1/sqrt(fan_in), biases zero
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
  return w;
}

Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng) {
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng) < keep ? 1.0 / keep : 0.0;
  return m;
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& cfg, std::mt19937_64& rng) {
  if (cfg.input_dim < 1 || cfg.hidden_dim < 1 || cfg.latent_dim < 1)
    throw InvalidConfig("encoder dimensions must be positive");
  EncoderParams p;
  p.w1 = uniform_weights(cfg.hidden_dim, cfg.input_dim, rng);
  p.b1 = Vector::Zero(cfg.hidden_dim);
  p.w2 = uniform_weights(cfg.hidden_dim, cfg.hidden_dim, rng);
  p.b2 = Vector::Zero(cfg.hidden_dim);
  p.w3 = uniform_weights(cfg.latent_dim, cfg.hidden_dim, rng);
  p.b3 = Vector::Zero(cfg.latent_dim);
  return p;
}

Matrix encode_batch(const EncoderParams& params, const Matrix& x, PassMode mode,
                    std::mt19937_64& rng, EncoderCache* cache) {
  if (x.cols() != params.input_dim())
    throw ShapeMismatch("encode: input has " + std::to_string(x.cols()) +
                        " columns, expected " + std::to_string(params.input_dim()));
  const Index n = x.rows();
  const bool train = mode == PassMode::Train;
  const double rate = 0.2;

  Matrix pre1 = (x * params.w1.transpose()).rowwise() + params.b1.transpose();
  Matrix act1 = pre1.unaryExpr([](double v) { return celu(v); });
  Matrix mask1 = train ? dropout_mask(n, act1.cols(), rate, rng)
                       : Matrix::Ones(n, act1.cols());
  Matrix drop1 = act1.cwiseProduct(mask1);

  Matrix pre2 = (drop1 * params.w2.transpose()).rowwise() + params.b2.transpose();
  Matrix act2 = pre2.unaryExpr([](double v) { return celu(v); });
  Matrix mask2 = train ? dropout_mask(n, act2.cols(), rate, rng)
                       : Matrix::Ones(n, act2.cols());
  Matrix drop2 = act2.cwiseProduct(mask2);

  Matrix out = (drop2 * params.w3.transpose()).rowwise() + params.b3.transpose();
  if (cache) {
    cache->input = x;
    cache->pre1 = std::move(pre1);
    cache->pre2 = std::move(pre2);
    cache->drop1 = std::move(drop1);
    cache->drop2 = std::move(drop2);
    cache->mask1 = std::move(mask1);
    cache->mask2 = std::move(mask2);
  }
  return out;
}

Vector encode(const EncoderParams& params, const Vector& x, PassMode mode,
              std::mt19937_64& rng) {
  return encode_batch(params, x.transpose(), mode, rng).row(0).transpose();
}

void EncoderGrads::setZero(const EncoderParams& p, Index n_rows) {
  w1 = Matrix::Zero(p.w1.rows(), p.w1.cols());
  w2 = Matrix::Zero(p.w2.rows(), p.w2.cols());
  w3 = Matrix::Zero(p.w3.rows(), p.w3.cols());
  b1 = Vector::Zero(p.b1.size());
  b2 = Vector::Zero(p.b2.size());
  b3 = Vector::Zero(p.b3.size());
  input = Matrix::Zero(n_rows, p.input_dim());
}

EncoderGrads encode_backward(const EncoderParams& params, const EncoderCache& cache,
                             const Matrix& upstream) {
  if (upstream.cols() != params.latent_dim() || upstream.rows() != cache.input.rows())
    throw ShapeMismatch("encode_backward: upstream shape mismatch");
  EncoderGrads g;
  g.w3 = upstream.transpose() * cache.drop2;
  g.b3 = upstream.colwise().sum().transpose();
  Matrix gd2 = upstream * params.w3;
  Matrix ga2 = gd2.cwiseProduct(cache.mask2)
                   .cwiseProduct(cache.pre2.unaryExpr([](double v) { return celu_derivative(v); }));
  g.w2 = ga2.transpose() * cache.drop1;
  g.b2 = ga2.colwise().sum().transpose();
  Matrix gd1 = ga2 * params.w2;
  Matrix ga1 = gd1.cwiseProduct(cache.mask1)
                   .cwiseProduct(cache.pre1.unaryExpr([](double v) { return celu_derivative(v); }));
  g.w1 = ga1.transpose() * cache.input;
  g.b1 = ga1.colwise().sum().transpose();
  g.input = ga1 * params.w1;
  return g;
}

EmbeddingTable init_embeddings(int n_individuals, Index dim, std::mt19937_64& rng) {
  EmbeddingTable table;
  // tight initialization: all individuals start (almost) fully correlated
  // and differentiate only as the residual structure pulls them apart
  table.individuals = 0.01 * uniform_weights(n_individuals, dim, rng);
  table.inducing = Matrix::Zero(0, dim);
  return table;
}

Vector embed(const EmbeddingTable& table, int index) {
  const int total = table.n_individuals() + static_cast<int>(table.inducing.rows());
  if (index < 1 || index > total)
    throw UnknownEntity("embed: index " + std::to_string(index) + " outside 1.." +
                        std::to_string(total));
  if (index <= table.n_individuals()) return table.individuals.row(index - 1).transpose();
  return table.inducing.row(index - 1 - table.n_individuals()).transpose();
}

}  // namespace ldkgp
