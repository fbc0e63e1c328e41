// SPDX-License-Identifier: Apache-2.0
#include "cachenet/submodels.hpp"

#include <cmath>
#include <string>

#include "cachenet/dense.hpp"
#include "cachenet/errors.hpp"

namespace cachenet {

Generator Generator::init(const SubmodelArch& arch, std::size_t k,
                          std::uint64_t seed) {
  if (k == 0) throw ConfigError("generator needs at least one branch");
  if (arch.input_dim == 0 || arch.hidden_dim == 0 || arch.num_classes < 2)
    throw ConfigError("generator architecture dims invalid");
  Generator g;
  g.arch = arch;
  CounterRng rng(seed, /*stream=*/3);
  const float s1 = 1.0f / std::sqrt(static_cast<float>(arch.input_dim));
  const float s2 = 1.0f / std::sqrt(static_cast<float>(arch.hidden_dim));
  g.trunk_w1 = Tensor::randn({arch.input_dim, arch.hidden_dim}, rng, s1);
  g.trunk_b1 = Tensor::zeros({arch.hidden_dim});
  g.trunk_w2 = Tensor::randn({arch.hidden_dim, arch.hidden_dim}, rng, s2);
  g.trunk_b2 = Tensor::zeros({arch.hidden_dim});
  g.head_w.reserve(k);
  g.head_b.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    // Branches start at zero: an untrained submodel is maximally uncertain.
    g.head_w.push_back(Tensor::zeros({arch.hidden_dim, arch.num_classes}));
    g.head_b.push_back(Tensor::zeros({arch.num_classes}));
  }
  return g;
}

SubmodelView Generator::generate(std::size_t k) const {
  if (k >= head_w.size())
    throw ContractError("generate: branch index out of range");
  return {&trunk_w1, &trunk_b1, &trunk_w2, &trunk_b2, &head_w[k], &head_b[k]};
}

Submodel Generator::materialize(std::size_t k) const {
  SubmodelView v = generate(k);
  return {*v.trunk_w1, *v.trunk_b1, *v.trunk_w2,
          *v.trunk_b2, *v.head_w,   *v.head_b};
}

std::vector<Tensor*> Generator::params() {
  std::vector<Tensor*> p{&trunk_w1, &trunk_b1, &trunk_w2, &trunk_b2};
  for (std::size_t i = 0; i < head_w.size(); ++i) {
    p.push_back(&head_w[i]);
    p.push_back(&head_b[i]);
  }
  return p;
}

std::vector<const Tensor*> Generator::params() const {
  std::vector<const Tensor*> p{&trunk_w1, &trunk_b1, &trunk_w2, &trunk_b2};
  for (std::size_t i = 0; i < head_w.size(); ++i) {
    p.push_back(&head_w[i]);
    p.push_back(&head_b[i]);
  }
  return p;
}

Tensor submodel_logits(const SubmodelView& m, const Tensor& x) {
  if (!x.finite()) throw DomainError("submodel: non-finite input");
  Tensor h1 = relu(dense(x, *m.trunk_w1, *m.trunk_b1));
  Tensor h2 = relu(dense(h1, *m.trunk_w2, *m.trunk_b2));
  return dense(h2, *m.head_w, *m.head_b);
}

Tensor submodel_probs(const SubmodelView& m, const Tensor& x) {
  return softmax_rows(submodel_logits(m, x));
}

double predictive_entropy(std::span<const float> probs) {
  double h = 0.0;
  for (float p : probs) {
    if (p < 0.0f) throw DomainError("entropy: negative probability");
    if (p > 0.0f) h -= static_cast<double>(p) * std::log(static_cast<double>(p));
  }
  return h;
}

std::vector<double> row_entropies(const Tensor& probs) {
  std::vector<double> h(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r)
    h[r] = predictive_entropy(
        std::span<const float>(probs.data.data() + r * probs.cols(), probs.cols()));
  return h;
}

int argmax_class(std::span<const float> probs) {
  if (probs.empty()) throw ContractError("argmax_class: empty probabilities");
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;
  return static_cast<int>(best);
}

double loss_jf(const Generator& gen, const Tensor& x_row, int y,
               const std::vector<std::size_t>& pset) {
  if (pset.empty()) throw ContractError("loss_jf: empty partition set");
  if (y < 0 || static_cast<std::size_t>(y) >= gen.arch.num_classes)
    throw ContractError("loss_jf: label out of range");
  Tensor x = x_row;
  if (x.ndim() == 1) x.dims = {1, x.numel()};
  double total = 0.0;
  for (std::size_t k : pset) {
    const Tensor lsm = softmax_rows(submodel_logits(gen.generate(k), x),
                                    /*log_mode=*/true);
    total -= static_cast<double>(lsm.data[static_cast<std::size_t>(y)]);
  }
  return total;
}

std::vector<Tensor> partition_masks(
    const std::vector<std::vector<std::size_t>>& psets,
    const std::vector<int>& labels, std::size_t num_branches,
    std::size_t num_classes) {
  if (psets.size() != labels.size())
    throw ContractError("partition_masks: batch size mismatch");
  std::vector<Tensor> masks;
  masks.reserve(num_branches);
  for (std::size_t k = 0; k < num_branches; ++k)
    masks.push_back(Tensor::zeros({psets.size(), num_classes}));
  for (std::size_t i = 0; i < psets.size(); ++i) {
    if (psets[i].empty()) throw ContractError("partition_masks: empty set");
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw ContractError("partition_masks: label out of range");
    for (std::size_t k : psets[i]) {
      if (k >= num_branches)
        throw ContractError("partition_masks: branch index out of range");
      masks[k].at(i, static_cast<std::size_t>(y)) = 1.0f;
    }
  }
  return masks;
}

JfNodes build_loss_jf(ad::Graph& g, const Generator& gen, const Tensor& x,
                      const std::vector<Tensor>& masks) {
  using ad::NodeId;
  if (masks.size() != gen.num_branches())
    throw ContractError("build_loss_jf: one mask per branch required");
  const std::size_t n = x.rows();

  JfNodes out;
  auto param = [&](const Tensor& t) {
    Tensor copy = t;
    copy.requires_grad = true;
    NodeId id = g.leaf(std::move(copy));
    out.chi.push_back(id);
    return id;
  };

  NodeId xn = g.leaf(x);
  NodeId tw1 = param(gen.trunk_w1), tb1 = param(gen.trunk_b1);
  NodeId tw2 = param(gen.trunk_w2), tb2 = param(gen.trunk_b2);
  NodeId h1 = g.relu(g.bias_add(g.matmul(xn, tw1), tb1));
  NodeId h2 = g.relu(g.bias_add(g.matmul(h1, tw2), tb2));

  NodeId acc = ad::kNoNode;
  for (std::size_t k = 0; k < gen.num_branches(); ++k) {
    NodeId hw = param(gen.head_w[k]), hb = param(gen.head_b[k]);
    NodeId logits = g.bias_add(g.matmul(h2, hw), hb);
    NodeId picked = g.mul(g.log_softmax(logits), g.leaf(masks[k]));
    NodeId term = g.sum(picked);
    acc = acc == ad::kNoNode ? term : g.add(acc, term);
  }
  out.loss = g.scale(acc, -1.0f / static_cast<float>(n));
  return out;
}

}  // namespace cachenet
