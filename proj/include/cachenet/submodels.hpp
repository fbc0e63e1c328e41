// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cachenet/graph.hpp"
#include "cachenet/tensor.hpp"

namespace cachenet {

struct SubmodelArch {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 32;
  std::size_t num_classes = 4;
};

// One submodel = the generator's shared trunk plus the branch selected by a
// one-hot index. Views borrow the generator's tensors; owned copies are for
// transport and the device side.
struct SubmodelView {
  const Tensor* trunk_w1;
  const Tensor* trunk_b1;
  const Tensor* trunk_w2;
  const Tensor* trunk_b2;
  const Tensor* head_w;
  const Tensor* head_b;
};

struct Submodel {
  Tensor trunk_w1, trunk_b1, trunk_w2, trunk_b2, head_w, head_b;
  SubmodelView view() const {
    return {&trunk_w1, &trunk_b1, &trunk_w2, &trunk_b2, &head_w, &head_b};
  }
};

// Parameter generator: a shared two-layer trunk and K head branches. The
// one-hot branch input of the conceptual design reduces to a table lookup.
struct Generator {
  SubmodelArch arch;
  Tensor trunk_w1, trunk_b1, trunk_w2, trunk_b2;
  std::vector<Tensor> head_w, head_b;  // branch k, zero-initialized

  static Generator init(const SubmodelArch& arch, std::size_t k,
                        std::uint64_t seed);

  std::size_t num_branches() const { return head_w.size(); }
  SubmodelView generate(std::size_t k) const;  // ContractError on bad k
  Submodel materialize(std::size_t k) const;

  std::vector<Tensor*> params();  // chi: trunk first, then branch pairs
  std::vector<const Tensor*> params() const;
};

// Class probabilities, rows summing to 1. x is (n, input_dim).
Tensor submodel_probs(const SubmodelView& m, const Tensor& x);
// Pre-softmax logits (shared by the probability and loss paths).
Tensor submodel_logits(const SubmodelView& m, const Tensor& x);

// Shannon entropy -sum p ln p in nats, with 0 ln 0 = 0.
double predictive_entropy(std::span<const float> probs);
// Entropy of each row of a probability tensor.
std::vector<double> row_entropies(const Tensor& probs);

// Predicted class: index of the largest probability, ties to the lowest
// index. Every inference path shares this rule so traces agree bit-exactly.
int argmax_class(std::span<const float> probs);

// Per-sample classification loss: sum over the sample's partition
// memberships of the cross-entropy of that submodel's prediction.
double loss_jf(const Generator& gen, const Tensor& x_row, int y,
               const std::vector<std::size_t>& pset);

// One-hot label masks per submodel: masks[k](i, y_i) = 1 iff k is in
// psets[i]. The classification loss contracts these against log-softmax.
std::vector<Tensor> partition_masks(
    const std::vector<std::vector<std::size_t>>& psets,
    const std::vector<int>& labels, std::size_t num_branches,
    std::size_t num_classes);

struct JfNodes {
  ad::NodeId loss = 0;
  std::vector<ad::NodeId> chi;  // aligned with Generator::params()
};

// Appends the batch-mean classification loss to `g`: for each branch, the
// masked log-softmax of its logits; summed over branches, divided by the
// batch size, negated.
JfNodes build_loss_jf(ad::Graph& g, const Generator& gen, const Tensor& x,
                      const std::vector<Tensor>& masks);

}  // namespace cachenet
