#ifndef LDKGP_KERNELS_HPP
#define LDKGP_KERNELS_HPP

#include <optional>
#include <random>

#include "ldkgp/dataset.hpp"
#include "ldkgp/encoder.hpp"
#include "ldkgp/types.hpp"

namespace ldkgp {

/// Additive kernel k = alpha_v^2 k_se(e(x), e(x')) + alpha_i^2 k_se(g(i), g(i')).
/// With bypass_encoder the time-varying latent is the raw covariate vector
/// (plain squared-exponential kernel on inputs).
struct KernelParams {
  double alpha_v = 1.0;
  double alpha_i = 1.0;
  EncoderParams encoder;
  EmbeddingTable embeddings;
  bool bypass_encoder = false;

  Index latent_dim_v() const {
    return bypass_encoder ? encoder.input_dim() : encoder.latent_dim();
  }
};

/// M inducing points in the concatenated latent space [z_v | z_i].
struct InducingPoints {
  Matrix z;       // M x (D_v + D_i)
  Index dim_v = 0;

  Index count() const { return z.rows(); }
  Index dim_i() const { return z.cols() - dim_v; }
  auto block_v() const { return z.leftCols(dim_v); }
  auto block_i() const { return z.rightCols(z.cols() - dim_v); }
};

InducingPoints init_inducing(Index count, Index dim_v, Index dim_i, std::mt19937_64& rng);

/// Keeps the embedding-table view of the inducing identity block in sync
/// with the canonical storage inside the inducing points.
void sync_inducing_embeddings(EmbeddingTable& table, const InducingPoints& z);

double k_se(const Vector& a, const Vector& b);
double k_timevarying(const KernelParams& kp, const Vector& x1, const Vector& x2);
double k_timeinvariant(const KernelParams& kp, int id1, int id2);
double k_additive(const KernelParams& kp, const Vector& x1, int id1, const Vector& x2,
                  int id2);

/// Pairwise k_se between row sets, exp(-||a_i - b_j||^2 / 2).
Matrix se_cross(const Matrix& a, const Matrix& b);

struct KernelMatrices {
  Matrix kxz;  // N x M
  Matrix kzz;  // M x M (raw, jitter applied at factorization time)
  std::optional<Matrix> kxx;
  double jitter = 1e-3;
};

/// Component values and latents kept from a gram evaluation for the
/// reverse pass.
struct GramCache {
  Matrix kxz_v, kxz_i;  // unscaled SE components of kxz
  Matrix kzz_v, kzz_i;
  Matrix latents;       // N x D_v
  Matrix embed_rows;    // N x D_i
  EncoderCache encoder;
  std::vector<int> ids;
};

KernelMatrices gram(const KernelParams& kp, const LongitudinalDataset& data,
                    const InducingPoints& z, PassMode mode, std::mt19937_64& rng,
                    GramCache* cache = nullptr, bool with_kxx = false);

/// Full N x N kernel matrix over a dataset (eval mode); used by the
/// correlation export, never by training.
Matrix gram_xx(const KernelParams& kp, const LongitudinalDataset& data,
               std::mt19937_64& rng);

}  // namespace ldkgp

#endif
