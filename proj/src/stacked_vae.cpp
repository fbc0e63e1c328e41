// SPDX-License-Identifier: Apache-2.0
#include "cachenet/stacked_vae.hpp"

#include <algorithm>
#include <cmath>

#include "cachenet/dense.hpp"
#include "cachenet/errors.hpp"

namespace cachenet {

void StackedVaeConfig::validate() const {
  if (input_dim == 0 || z_dim == 0 || hidden_dim == 0)
    throw ConfigError("vae dims must be positive");
  if (!(1.0f - alpha_info >= 0.0f))
    throw ConfigError("alpha_info must be <= 1 (KL weight would go negative)");
  if (!(alpha_info + lambda_scale - 1.0f >= 0.0f))
    throw ConfigError("alpha_info + lambda_scale must be >= 1");
}

namespace {

GaussEncoder init_encoder(std::size_t in, std::size_t hidden, std::size_t out,
                          CounterRng& rng) {
  GaussEncoder e;
  e.w1 = Tensor::randn({in, hidden}, rng, 1.0f / std::sqrt(static_cast<float>(in)));
  e.b1 = Tensor::zeros({hidden});
  e.wmu = Tensor::randn({hidden, out}, rng, 1.0f / std::sqrt(static_cast<float>(hidden)));
  e.bmu = Tensor::zeros({out});
  e.wlv = Tensor::randn({hidden, out}, rng, 1.0f / std::sqrt(static_cast<float>(hidden)));
  e.blv = Tensor::zeros({out});
  return e;
}

Decoder init_decoder(std::size_t in, std::size_t hidden, std::size_t out,
                     CounterRng& rng) {
  Decoder d;
  d.w1 = Tensor::randn({in, hidden}, rng, 1.0f / std::sqrt(static_cast<float>(in)));
  d.b1 = Tensor::zeros({hidden});
  d.w2 = Tensor::randn({hidden, out}, rng, 1.0f / std::sqrt(static_cast<float>(hidden)));
  d.b2 = Tensor::zeros({out});
  return d;
}

// Mean and clamped log-variance heads of one encoder, plain inference path.
std::pair<Tensor, Tensor> encoder_heads(const GaussEncoder& e, const Tensor& x) {
  if (!x.finite()) throw DomainError("encode: non-finite input");
  Tensor h = relu(dense(x, e.w1, e.b1));
  Tensor mu = dense(h, e.wmu, e.bmu);
  Tensor lv = clamp(dense(h, e.wlv, e.blv), kLogvarLo, kLogvarHi);
  return {std::move(mu), std::move(lv)};
}

Tensor sample_from(const std::pair<Tensor, Tensor>& heads, CounterRng& rng) {
  const Tensor& mu = heads.first;
  const Tensor& lv = heads.second;
  Tensor z = Tensor::zeros(mu.dims);
  for (std::size_t i = 0; i < z.numel(); ++i)
    z.data[i] = mu.data[i] + std::exp(0.5f * lv.data[i]) * rng.next_normal();
  return z;
}

double lower_median_floored(std::vector<float> v) {
  std::sort(v.begin(), v.end());
  return std::max(static_cast<double>(v[(v.size() - 1) / 2]), 1e-6);
}

// One stage of the objective: reconstruction + KL + kernel discrepancy on a
// fixed input batch. `input` enters as a constant leaf.
VaeLossNodes build_stage(ad::Graph& g, const GaussEncoder& enc,
                         const Decoder& dec, const Tensor& input,
                         std::size_t latent_dim, float alpha, float lambda) {
  using ad::NodeId;
  if (input.ndim() != 2) throw ShapeError("loss batch must be 2-D");
  const std::size_t n = input.rows();
  if (n < 2) throw ContractError("batch size must be >= 2");

  VaeLossNodes out;
  auto param = [&](const Tensor& t) {
    Tensor copy = t;
    copy.requires_grad = true;
    NodeId id = g.leaf(std::move(copy));
    out.params.push_back(id);
    return id;
  };

  NodeId x = g.leaf(input);
  NodeId ew1 = param(enc.w1), eb1 = param(enc.b1);
  NodeId ewmu = param(enc.wmu), ebmu = param(enc.bmu);
  NodeId ewlv = param(enc.wlv), eblv = param(enc.blv);
  NodeId dw1 = param(dec.w1), db1 = param(dec.b1);
  NodeId dw2 = param(dec.w2), db2 = param(dec.b2);

  NodeId h = g.relu(g.bias_add(g.matmul(x, ew1), eb1));
  NodeId mu = g.bias_add(g.matmul(h, ewmu), ebmu);
  NodeId lv = g.clamp(g.bias_add(g.matmul(h, ewlv), eblv), kLogvarLo, kLogvarHi);
  NodeId z = g.gaussian_sample(mu, lv);

  NodeId dh = g.relu(g.bias_add(g.matmul(z, dw1), db1));
  NodeId xhat = g.bias_add(g.matmul(dh, dw2), db2);
  NodeId recon =
      g.scale(g.sum(g.square(g.sub(xhat, x))), 0.5f / static_cast<float>(n));

  NodeId ones = g.leaf(Tensor::full({n, latent_dim}, 1.0f));
  NodeId klterm = g.sub(g.sub(g.add(g.square(mu), g.exp(lv)), ones), lv);
  NodeId kl = g.scale(g.sum(klterm), 0.5f / static_cast<float>(n));

  NodeId prior = g.leaf(Tensor::randn({n, latent_dim}, g.rng(), 1.0f));
  NodeId dqq = g.pairwise_sqdist(z, z);
  NodeId dpp = g.pairwise_sqdist(prior, prior);
  NodeId dqp = g.pairwise_sqdist(z, prior);
  // Bandwidth is data-dependent but treated as a constant of the objective:
  // frozen here so gradients and re-evaluations see the same function.
  const double bw = lower_median_floored(g.value(dqp).data);
  const float inv_bw = static_cast<float>(-1.0 / bw);
  NodeId kqq = g.exp(g.scale(dqq, inv_bw));
  NodeId kpp = g.exp(g.scale(dpp, inv_bw));
  NodeId kqp = g.exp(g.scale(dqp, inv_bw));
  NodeId mmd2 = g.relu(g.sub(g.add(g.offdiag_mean(kqq), g.offdiag_mean(kpp)),
                             g.scale(g.mean(kqp), 2.0f)));

  NodeId loss = g.add(
      recon, g.add(g.scale(kl, 1.0f - alpha), g.scale(mmd2, alpha + lambda - 1.0f)));

  out.loss = loss;
  out.recon = recon;
  out.kl = kl;
  out.mmd = mmd2;
  out.mu = mu;
  out.lv = lv;
  out.z = z;
  return out;
}

}  // namespace

StackedVae StackedVae::init(const StackedVaeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  StackedVae v;
  v.cfg = cfg;
  CounterRng r1(seed, /*stream=*/1);
  v.enc1 = init_encoder(cfg.input_dim, cfg.hidden_dim, cfg.z_dim, r1);
  v.dec1 = init_decoder(cfg.z_dim, cfg.hidden_dim, cfg.input_dim, r1);
  CounterRng r2(seed, /*stream=*/2);
  v.enc2 = init_encoder(cfg.z_dim, cfg.hidden_dim, StackedVaeConfig::kZbarDim, r2);
  v.dec2 = init_decoder(StackedVaeConfig::kZbarDim, cfg.hidden_dim, cfg.z_dim, r2);
  return v;
}

Tensor StackedVae::encode_mean(const Tensor& x) const {
  return encoder_heads(enc1, x).first;
}

Tensor StackedVae::encode2_mean(const Tensor& z) const {
  return encoder_heads(enc2, z).first;
}

Tensor StackedVae::encode_sample(const Tensor& x, CounterRng& rng) const {
  return sample_from(encoder_heads(enc1, x), rng);
}

Tensor StackedVae::encode2_sample(const Tensor& z, CounterRng& rng) const {
  return sample_from(encoder_heads(enc2, z), rng);
}

std::vector<Tensor*> StackedVae::stage1_params() {
  return {&enc1.w1, &enc1.b1, &enc1.wmu, &enc1.bmu, &enc1.wlv, &enc1.blv,
          &dec1.w1, &dec1.b1, &dec1.w2, &dec1.b2};
}
std::vector<Tensor*> StackedVae::stage2_params() {
  return {&enc2.w1, &enc2.b1, &enc2.wmu, &enc2.bmu, &enc2.wlv, &enc2.blv,
          &dec2.w1, &dec2.b1, &dec2.w2, &dec2.b2};
}
std::vector<const Tensor*> StackedVae::stage1_params() const {
  return {&enc1.w1, &enc1.b1, &enc1.wmu, &enc1.bmu, &enc1.wlv, &enc1.blv,
          &dec1.w1, &dec1.b1, &dec1.w2, &dec1.b2};
}
std::vector<const Tensor*> StackedVae::stage2_params() const {
  return {&enc2.w1, &enc2.b1, &enc2.wmu, &enc2.bmu, &enc2.wlv, &enc2.blv,
          &dec2.w1, &dec2.b1, &dec2.w2, &dec2.b2};
}

VaeLossNodes build_loss_infovae(ad::Graph& g, const StackedVae& vae,
                                const Tensor& x) {
  if (x.cols() != vae.cfg.input_dim)
    throw ShapeError("loss_infovae: input width mismatch");
  return build_stage(g, vae.enc1, vae.dec1, x, vae.cfg.z_dim,
                     vae.cfg.alpha_info, vae.cfg.lambda_scale);
}

VaeLossNodes build_loss_stage2(ad::Graph& g, const StackedVae& vae,
                               const Tensor& z) {
  if (z.cols() != vae.cfg.z_dim)
    throw ShapeError("loss_stage2: latent width mismatch");
  return build_stage(g, vae.enc2, vae.dec2, z, StackedVaeConfig::kZbarDim,
                     vae.cfg.alpha_info, vae.cfg.lambda_scale);
}

double loss_infovae(const StackedVae& vae, const Tensor& x,
                    std::uint64_t seed) {
  ad::Graph g(seed);
  return g.scalar(build_loss_infovae(g, vae, x).loss);
}

double loss_stage2(const StackedVae& vae, const Tensor& z, std::uint64_t seed) {
  ad::Graph g(seed);
  return g.scalar(build_loss_stage2(g, vae, z).loss);
}

double gaussian_kl(const Tensor& mu, const Tensor& logvar) {
  if (!mu.same_shape(logvar)) throw ShapeError("gaussian_kl: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.numel(); ++i) {
    const double m = mu.data[i], l = logvar.data[i];
    acc += m * m + std::exp(l) - 1.0 - l;
  }
  return 0.5 * acc / static_cast<double>(mu.rows());
}

double mmd(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols())
    throw ShapeError("mmd: sample sets must be 2-D with equal width");
  const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
  if (n < 2 || m < 2) throw ContractError("mmd: need at least 2 samples each");

  auto sqd = [d](const Tensor& s, std::size_t i, const Tensor& t,
                 std::size_t j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      const double diff = static_cast<double>(s.data[i * d + l]) -
                          static_cast<double>(t.data[j * d + l]);
      acc += diff * diff;
    }
    return acc;
  };

  std::vector<float> cross;
  cross.reserve(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cross.push_back(static_cast<float>(sqd(a, i, b, j)));
  const double bw = lower_median_floored(std::move(cross));

  auto offdiag = [&](const Tensor& s, std::size_t rows) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < rows; ++j)
        if (i != j) acc += std::exp(-sqd(s, i, s, j) / bw);
    return acc / static_cast<double>(rows * (rows - 1));
  };

  // Cross term accumulated as (sum of row sums + sum of column sums) / 2:
  // identical floating-point result when the arguments are swapped.
  double row_part = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) r += std::exp(-sqd(a, i, b, j) / bw);
    row_part += r;
  }
  double col_part = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += std::exp(-sqd(a, i, b, j) / bw);
    col_part += c;
  }
  const double cross_mean =
      (row_part + col_part) / 2.0 / static_cast<double>(n * m);

  return std::max(0.0, offdiag(a, n) + offdiag(b, m) - 2.0 * cross_mean);
}

}  // namespace cachenet
