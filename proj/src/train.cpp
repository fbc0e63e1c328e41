// SPDX-License-Identifier: Apache-2.0
#include "cachenet/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "cachenet/errors.hpp"
#include "cachenet/graph.hpp"
#include "cachenet/rng.hpp"

namespace cachenet {
namespace {

void validate_inputs(const Dataset& data, const StackedVaeConfig& vae_cfg,
                     const SubmodelArch& arch, const PartitionConfig& pcfg,
                     const TrainConfig& tcfg) {
  vae_cfg.validate();
  pcfg.validate();
  if (data.x.ndim() != 2) throw ShapeError("train: inputs must be (n, d)");
  if (data.y.size() != data.x.rows())
    throw ShapeError("train: one label per input row required");
  if (data.num_classes < 2) throw ConfigError("train: need >= 2 classes");
  if (data.x.cols() != vae_cfg.input_dim || data.x.cols() != arch.input_dim)
    throw ConfigError("train: input width disagrees with model configs");
  if (arch.num_classes != data.num_classes)
    throw ConfigError("train: class count disagrees with architecture");
  if (data.x.rows() < 2)
    throw ConfigError("train: need at least two samples");
  if (tcfg.epochs == 0) throw ConfigError("train: epochs must be positive");
  if (tcfg.batch < 2) throw ConfigError("train: batch must be >= 2");
  if (tcfg.eta <= 0.0f) throw ConfigError("train: learning rate must be positive");
  if (tcfg.nu > tcfg.epochs)
    throw ConfigError("train: phase switch epoch exceeds epoch budget");
  for (int label : data.y)
    if (label < 0 || static_cast<std::size_t>(label) >= data.num_classes)
      throw ConfigError("train: label out of range");
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& order,
                   std::size_t begin, std::size_t end) {
  const std::size_t d = x.cols();
  std::vector<float> out((end - begin) * d);
  for (std::size_t i = begin; i < end; ++i)
    std::copy_n(x.data.data() + order[i] * d, d,
                out.data() + (i - begin) * d);
  return Tensor({end - begin, d}, std::move(out));
}

void apply_sgd(const ad::Graph::GradMap& grads,
               const std::vector<Tensor*>& params,
               const std::vector<ad::NodeId>& ids, float eta) {
  if (params.size() != ids.size())
    throw ContractError("sgd phase: parameter/node count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    ad::sgd_step(*params[i], grads.at(ids[i]), eta);
}

}  // namespace

TotalNodes build_loss_total(ad::Graph& g, const StackedVae& vae,
                            const Generator& gen, const Tensor& x,
                            const MaskBuilder& make_masks) {
  TotalNodes t;
  t.s1 = build_loss_infovae(g, vae, x);
  t.s2 = build_loss_stage2(g, vae, g.value(t.s1.z));
  t.jf = build_loss_jf(g, gen, x, make_masks(g.value(t.s2.z)));
  t.loss = g.add(g.add(t.jf.loss, t.s1.loss), t.s2.loss);
  return t;
}

TrainResult train(const Dataset& data, const StackedVaeConfig& vae_cfg,
                  const SubmodelArch& arch, const PartitionConfig& pcfg,
                  const TrainConfig& tcfg) {
  validate_inputs(data, vae_cfg, arch, pcfg, tcfg);

  TrainResult res;
  res.nu_used = tcfg.nu == 0
                    ? std::max<std::size_t>(1, (tcfg.epochs * 3) / 5)
                    : tcfg.nu;
  res.vae = StackedVae::init(vae_cfg, tcfg.seed);
  res.gen = Generator::init(arch, pcfg.k, tcfg.seed);

  const std::size_t n = data.x.rows();
  const std::vector<double> zeta = midpoints(pcfg.k);
  const double sigma = pcfg.sigma();

  CounterRng shuffle_rng(tcfg.seed, /*stream=*/4);
  CounterRng jitter_rng(tcfg.seed, /*stream=*/5);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double best_j = 0.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    // Full-parameter phase runs while epoch < nu; from nu on only the
    // generator moves. nu == epochs means the handover never happens.
    const bool kappa_phase = epoch < res.nu_used || res.nu_used == tcfg.epochs;

    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double sum_j = 0.0, sum_jf = 0.0, sum_s1 = 0.0, sum_s2 = 0.0;
    std::size_t seen = 0;

    for (std::size_t begin = 0, bidx = 0; begin < n;
         begin += tcfg.batch, ++bidx) {
      const std::size_t end = std::min(begin + tcfg.batch, n);
      const std::size_t b = end - begin;
      if (b < 2) break;  // discrepancy and cross terms need pairs

      Tensor xb = gather_rows(data.x, order, begin, end);
      std::vector<int> yb(b);
      for (std::size_t i = 0; i < b; ++i) yb[i] = data.y[order[begin + i]];

      try {
        auto code_batch = [&](const Tensor& zbar) {
          // Per-branch predictive entropy on the raw inputs.
          std::vector<std::vector<double>> branch_h(pcfg.k);
          for (std::size_t k = 0; k < pcfg.k; ++k)
            branch_h[k] =
                row_entropies(submodel_probs(res.gen.generate(k), xb));

          std::vector<std::vector<std::size_t>> psets(b);
          for (std::size_t i = 0; i < b; ++i) {
            const double theta = angle_of(zbar.at(i, 0), zbar.at(i, 1));
            const double eps = static_cast<double>(jitter_rng.next_normal()) *
                               pcfg.epsilon_std;
            const std::vector<double> cbar =
                soft_code(jitter(theta, eps), zeta, sigma);
            std::vector<double> h(pcfg.k);
            for (std::size_t k = 0; k < pcfg.k; ++k) h[k] = branch_h[k][i];
            const std::vector<double> c =
                combine(cbar, uncertainty_code(h, pcfg.tau), pcfg.alpha_mix);
            psets[i] = partition_set(c, pcfg.tau);
          }
          return partition_masks(psets, yb, pcfg.k, data.num_classes);
        };

        ad::Graph g(CounterRng::mix(tcfg.seed, epoch * 100003 + bidx));
        TotalNodes t = build_loss_total(g, res.vae, res.gen, xb, code_batch);

        sum_j += g.scalar(t.loss) * static_cast<double>(b);
        sum_jf += g.scalar(t.jf.loss) * static_cast<double>(b);
        sum_s1 += g.scalar(t.s1.loss) * static_cast<double>(b);
        sum_s2 += g.scalar(t.s2.loss) * static_cast<double>(b);
        seen += b;

        // Phase 1 updates every parameter block; phase 2 the generator only.
        ad::Graph::GradMap grads = g.backward(t.loss);
        if (kappa_phase) {
          apply_sgd(grads, res.vae.stage1_params(), t.s1.params, tcfg.eta);
          apply_sgd(grads, res.vae.stage2_params(), t.s2.params, tcfg.eta);
        }
        apply_sgd(grads, res.gen.params(), t.jf.chi, tcfg.eta);
      } catch (const DomainError& e) {
        throw DomainError("training diverged at epoch " +
                          std::to_string(epoch) + ", batch " +
                          std::to_string(bidx) + ": " + e.what());
      }
    }

    if (seen == 0) throw ContractError("train: no usable batches");
    EpochLog log;
    log.epoch = epoch;
    log.j = sum_j / static_cast<double>(seen);
    log.jf = sum_jf / static_cast<double>(seen);
    log.lvae = sum_s1 / static_cast<double>(seen);
    log.lvae2 = sum_s2 / static_cast<double>(seen);
    res.log.push_back(log);

    if (epoch == 1 || log.j < best_j) {
      best_j = log.j;
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  return res;
}

}  // namespace cachenet
