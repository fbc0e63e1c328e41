// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cachenet/partition.hpp"
#include "cachenet/stacked_vae.hpp"
#include "cachenet/submodels.hpp"
#include "cachenet/tensor.hpp"

namespace cachenet {

struct Dataset {
  Tensor x;            // (n, input_dim)
  std::vector<int> y;  // labels in [0, num_classes)
  std::size_t num_classes = 0;
};

struct TrainConfig {
  std::size_t epochs = 30;
  // Epochs 1..nu-1 update every parameter block; epochs nu.. update the
  // generator only. nu == epochs keeps the full-parameter phase for the
  // whole run; nu == 0 resolves to 60% of epochs.
  std::size_t nu = 0;
  std::size_t batch = 32;
  float eta = 0.05f;
  std::uint64_t seed = 1;
  std::size_t patience = 3;  // early stop after this many non-improving epochs
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double j = 0.0;         // total objective, sample-weighted epoch mean
  double jf = 0.0;
  double lvae = 0.0;
  double lvae2 = 0.0;
};

struct TrainResult {
  StackedVae vae;
  Generator gen;
  std::vector<EpochLog> log;
  bool early_stopped = false;
  std::size_t nu_used = 0;
};

// Node handles for the joint objective: classification loss plus both
// encoder-stack objectives, built in one graph so a single backward pass
// serves whichever parameter block the current phase updates.
struct TotalNodes {
  ad::NodeId loss = 0;
  VaeLossNodes s1;       // stage-1 objective on x
  VaeLossNodes s2;       // stage-2 objective on the detached stage-1 latent
  JfNodes jf;
};

// `make_masks` receives the sampled 2-D latent batch (one row per sample)
// and returns the per-branch label masks for the classification term; it is
// where the partition coding of the batch happens.
using MaskBuilder = std::function<std::vector<Tensor>(const Tensor& zbar)>;

TotalNodes build_loss_total(ad::Graph& g, const StackedVae& vae,
                            const Generator& gen, const Tensor& x,
                            const MaskBuilder& make_masks);

// Joint training: per batch, one graph holds the stage-1 objective, the
// stage-2 objective on the detached stage-1 latent, and the classification
// objective gated by the partition sets of the jittered stage-2 angles.
// Which parameter block the gradients update depends on the epoch phase.
TrainResult train(const Dataset& data, const StackedVaeConfig& vae_cfg,
                  const SubmodelArch& arch, const PartitionConfig& pcfg,
                  const TrainConfig& tcfg);

}  // namespace cachenet
