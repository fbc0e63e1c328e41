// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "cachenet/graph.hpp"
#include "cachenet/rng.hpp"
#include "cachenet/tensor.hpp"

namespace cachenet {

// Two-stage variational autoencoder: stage 1 maps inputs to a wide latent z,
// stage 2 compresses z to a 2-D latent whose angle drives partitioning.
// Both stages train with the same objective: reconstruction + weighted KL to
// the unit Gaussian + weighted kernel discrepancy between the aggregate
// latent and the prior.
struct StackedVaeConfig {
  std::size_t input_dim = 8;
  std::size_t z_dim = 16;
  static constexpr std::size_t kZbarDim = 2;  // the partitioner needs a plane
  std::size_t hidden_dim = 32;
  float alpha_info = 0.9f;   // KL weight is (1 - alpha_info)
  float lambda_scale = 1.5f; // discrepancy weight is (alpha_info + lambda_scale - 1)

  void validate() const;  // throws ConfigError
};

struct GaussEncoder {
  Tensor w1, b1;    // input -> hidden (relu)
  Tensor wmu, bmu;  // hidden -> mean
  Tensor wlv, blv;  // hidden -> log-variance (clamped to [-10, 10])
};

struct Decoder {
  Tensor w1, b1;  // latent -> hidden (relu)
  Tensor w2, b2;  // hidden -> reconstruction
};

inline constexpr float kLogvarLo = -10.0f;
inline constexpr float kLogvarHi = 10.0f;

struct StackedVae {
  StackedVaeConfig cfg;
  GaussEncoder enc1, enc2;
  Decoder dec1, dec2;

  static StackedVae init(const StackedVaeConfig& cfg, std::uint64_t seed);

  // Mean-mode encoders (inference): pure, no sampling.
  Tensor encode_mean(const Tensor& x) const;        // (n,input_dim) -> (n,z_dim)
  Tensor encode2_mean(const Tensor& z) const;       // (n,z_dim) -> (n,2)
  // Reparameterized samples for training-time use.
  Tensor encode_sample(const Tensor& x, CounterRng& rng) const;
  Tensor encode2_sample(const Tensor& z, CounterRng& rng) const;

  std::vector<Tensor*> stage1_params();
  std::vector<Tensor*> stage2_params();
  std::vector<const Tensor*> stage1_params() const;
  std::vector<const Tensor*> stage2_params() const;
};

// Node handles for one loss subgraph; `params` aligns with stageN_params().
struct VaeLossNodes {
  ad::NodeId loss = 0;
  ad::NodeId recon = 0;  // raw term values, before weighting
  ad::NodeId kl = 0;
  ad::NodeId mmd = 0;
  ad::NodeId mu = 0;  // encoder heads
  ad::NodeId lv = 0;
  ad::NodeId z = 0;  // the sampled latent batch
  std::vector<ad::NodeId> params;
};

// Appends the stage-1 objective for batch `x` to `g`. Batch size must be >= 2
// (the discrepancy term needs pairs). Prior samples and reparameterization
// noise are drawn from the graph's own stream.
VaeLossNodes build_loss_infovae(ad::Graph& g, const StackedVae& vae,
                                const Tensor& x);
// Stage-2 objective on a fixed z batch (stage-1 gradients are cut here by
// passing values, not nodes).
VaeLossNodes build_loss_stage2(ad::Graph& g, const StackedVae& vae,
                               const Tensor& z);

// Convenience scalar evaluations (fresh graph, seeded).
double loss_infovae(const StackedVae& vae, const Tensor& x, std::uint64_t seed);
double loss_stage2(const StackedVae& vae, const Tensor& z, std::uint64_t seed);

// Unbiased squared kernel discrepancy between two sample sets (rows), RBF
// kernel with median-of-cross-distances bandwidth, clamped at zero. Exactly
// symmetric in its arguments.
double mmd(const Tensor& a, const Tensor& b);

// KL(N(mu, diag(exp(logvar))) || N(0, I)) for one diagonal Gaussian row set,
// averaged over rows.
double gaussian_kl(const Tensor& mu, const Tensor& logvar);

}  // namespace cachenet
