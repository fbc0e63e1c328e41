// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "cachenet/tensor.hpp"
#include "cachenet/train.hpp"

namespace cachenet {

// Synthetic workload: Gaussian class clusters in input space, plus a Markov
// frame stream with tunable temporal locality over those clusters.
struct StreamConfig {
  std::size_t num_classes = 8;
  std::size_t input_dim = 32;
  std::size_t samples_per_class = 64;  // size of each class's frame pool
  double mean_run_length = 50.0;       // expected consecutive same-class frames
  std::size_t frames = 5000;
  std::uint64_t seed = 1;

  // Cluster geometry: class means sit on a circle of this radius in the
  // leading 2-D plane, with N(0, spread^2) components in the remaining dims;
  // samples add isotropic N(0, noise_std^2).
  double cluster_radius = 2.0;
  double cluster_spread = 0.5;
  double noise_std = 0.3;

  void validate() const;  // throws ConfigError
};

// Deterministic per-class cluster means, one tensor of length input_dim each.
std::vector<Tensor> class_means(const StreamConfig& cfg);

// Balanced labeled sample set: samples_per_class draws from every cluster.
// stream_sel separates independent sets (train vs. held-out) under one seed.
Dataset make_cluster_dataset(const StreamConfig& cfg, std::uint64_t stream_sel);

// Markov frame stream: stay in the current class with probability
// 1 - 1/mean_run_length, otherwise switch uniformly to one of the OTHER
// classes, so the expected run length is exactly mean_run_length. Frames are
// drawn uniformly from per-class pools of samples_per_class members.
Dataset gen_stream(const StreamConfig& cfg);

}  // namespace cachenet
