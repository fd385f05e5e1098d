#include "ldkgp/kernels.hpp"

#include <cmath>

namespace ldkgp {

InducingPoints init_inducing(Index count, Index dim_v, Index dim_i, std::mt19937_64& rng) {
  if (count < 1) throw InvalidConfig("inducing point count must be >= 1");
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  InducingPoints out;
  out.dim_v = dim_v;
  out.z.resize(count, dim_v + dim_i);
  for (Index i = 0; i < out.z.rows(); ++i)
    for (Index j = 0; j < out.z.cols(); ++j) out.z(i, j) = dist(rng);
  return out;
}

void sync_inducing_embeddings(EmbeddingTable& table, const InducingPoints& z) {
  table.inducing = z.block_i();
}

double k_se(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("k_se: length mismatch");
  return std::exp(-0.5 * (a - b).squaredNorm());
}

double k_timevarying(const KernelParams& kp, const Vector& x1, const Vector& x2) {
  if (kp.bypass_encoder) return k_se(x1, x2);
  std::mt19937_64 unused(0);  // eval mode draws nothing
  return k_se(encode(kp.encoder, x1, PassMode::Eval, unused),
              encode(kp.encoder, x2, PassMode::Eval, unused));
}

double k_timeinvariant(const KernelParams& kp, int id1, int id2) {
  return k_se(embed(kp.embeddings, id1), embed(kp.embeddings, id2));
}

double k_additive(const KernelParams& kp, const Vector& x1, int id1, const Vector& x2,
                  int id2) {
  return kp.alpha_v * kp.alpha_v * k_timevarying(kp, x1, x2) +
         kp.alpha_i * kp.alpha_i * k_timeinvariant(kp, id1, id2);
}

Matrix se_cross(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("se_cross: dimension mismatch");
  const Vector a2 = a.rowwise().squaredNorm();
  const Vector b2 = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * a * b.transpose());
  d2.colwise() += a2;
  d2.rowwise() += b2.transpose();
  return (-0.5 * d2.cwiseMax(0.0)).array().exp();
}

namespace {

Matrix gather_embed_rows(const EmbeddingTable& table, const std::vector<int>& ids) {
  Matrix rows(static_cast<Index>(ids.size()), table.dim());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 1 || id > table.n_individuals())
      throw UnknownEntity("gram: individual id " + std::to_string(id) +
                          " has no embedding row");
    rows.row(static_cast<Index>(r)) = table.individuals.row(id - 1);
  }
  return rows;
}

}  // namespace

KernelMatrices gram(const KernelParams& kp, const LongitudinalDataset& data,
                    const InducingPoints& z, PassMode mode, std::mt19937_64& rng,
                    GramCache* cache, bool with_kxx) {
  if (data.n_rows() == 0) throw DataError("gram: empty dataset");
  const double av2 = kp.alpha_v * kp.alpha_v;
  const double ai2 = kp.alpha_i * kp.alpha_i;

  Matrix latents;
  EncoderCache enc_cache;
  if (kp.bypass_encoder) {
    latents = data.covariates;
  } else {
    latents = encode_batch(kp.encoder, data.covariates, mode, rng,
                           cache ? &enc_cache : nullptr);
  }
  if (latents.cols() != z.dim_v)
    throw ShapeMismatch("gram: latent dimension does not match inducing block");
  Matrix embed_rows = gather_embed_rows(kp.embeddings, data.individual);
  if (embed_rows.cols() != z.dim_i())
    throw ShapeMismatch("gram: embedding dimension does not match inducing block");

  KernelMatrices km;
  Matrix kxz_v = se_cross(latents, z.block_v());
  Matrix kxz_i = se_cross(embed_rows, z.block_i());
  Matrix kzz_v = se_cross(z.block_v(), z.block_v());
  Matrix kzz_i = se_cross(z.block_i(), z.block_i());
  km.kxz = av2 * kxz_v + ai2 * kxz_i;
  km.kzz = av2 * kzz_v + ai2 * kzz_i;
  if (with_kxx)
    km.kxx = av2 * se_cross(latents, latents) + ai2 * se_cross(embed_rows, embed_rows);
  if (cache) {
    cache->kxz_v = std::move(kxz_v);
    cache->kxz_i = std::move(kxz_i);
    cache->kzz_v = std::move(kzz_v);
    cache->kzz_i = std::move(kzz_i);
    cache->latents = std::move(latents);
    cache->embed_rows = std::move(embed_rows);
    cache->encoder = std::move(enc_cache);
    cache->ids = data.individual;
  }
  return km;
}

Matrix gram_xx(const KernelParams& kp, const LongitudinalDataset& data,
               std::mt19937_64& rng) {
  Matrix latents = kp.bypass_encoder
                       ? data.covariates
                       : encode_batch(kp.encoder, data.covariates, PassMode::Eval, rng);
  Matrix embed_rows = gather_embed_rows(kp.embeddings, data.individual);
  return kp.alpha_v * kp.alpha_v * se_cross(latents, latents) +
         kp.alpha_i * kp.alpha_i * se_cross(embed_rows, embed_rows);
}

}  // namespace ldkgp
