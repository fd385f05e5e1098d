#ifndef LDKGP_ENCODER_HPP
#define LDKGP_ENCODER_HPP

#include <random>

#include "ldkgp/types.hpp"

namespace ldkgp {

enum class PassMode { Train, Eval };

double celu(double x, double alpha = 1.0);
double celu_derivative(double x, double alpha = 1.0);

struct EncoderConfig {
  Index input_dim = 0;    // P
  Index hidden_dim = 16;  // H
  Index latent_dim = 10;  // D_v
  double dropout_rate = 0.2;
};

/// Fully connected encoder: input -> hidden -> CELU -> dropout ->
/// hidden -> CELU -> dropout -> latent. Weight rows are output units.
struct EncoderParams {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;

  Index input_dim() const { return w1.cols(); }
  Index hidden_dim() const { return w1.rows(); }
  Index latent_dim() const { return w3.rows(); }
};

EncoderParams init_encoder(const EncoderConfig& cfg, std::mt19937_64& rng);

/// Activations and dropout masks of one forward pass, reused by backward.
struct EncoderCache {
  Matrix input;        // N x P
  Matrix pre1, pre2;   // pre-activations
  Matrix drop1, drop2; // post-dropout activations
  Matrix mask1, mask2; // inverted-scaling dropout masks (all-ones in eval)
};

/// Batched forward pass; rows are samples. Dropout (inverted scaling) is
/// active only in train mode, so eval mode is deterministic.
Matrix encode_batch(const EncoderParams& params, const Matrix& x, PassMode mode,
                    std::mt19937_64& rng, EncoderCache* cache = nullptr);

Vector encode(const EncoderParams& params, const Vector& x, PassMode mode,
              std::mt19937_64& rng);

struct EncoderGrads {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
  Matrix input;  // N x P, gradient w.r.t. the inputs

  void setZero(const EncoderParams& p, Index n_rows);
};

/// Reverse-mode gradients of sum_n upstream_n . encode(x_n) for the cached
/// forward pass (same dropout masks).
EncoderGrads encode_backward(const EncoderParams& params, const EncoderCache& cache,
                             const Matrix& upstream);

/// Per-entity latent vectors: rows 1..I are learned individual embeddings,
/// rows I+1..I+M alias the identity block of the inducing points.
struct EmbeddingTable {
  Matrix individuals;  // I x D_i, learned
  Matrix inducing;     // M x D_i, synced from the inducing points

  int n_individuals() const { return static_cast<int>(individuals.rows()); }
  Index dim() const { return individuals.cols(); }
};

EmbeddingTable init_embeddings(int n_individuals, Index dim, std::mt19937_64& rng);

Vector embed(const EmbeddingTable& table, int index);

}  // namespace ldkgp

#endif
