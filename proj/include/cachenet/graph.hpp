// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "cachenet/rng.hpp"
#include "cachenet/tensor.hpp"

namespace cachenet::ad {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xFFFFFFFFu;

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kBiasAdd,
  kSub,
  kMul,
  kScale,
  kRelu,
  kTanh,
  kClamp,
  kSoftmax,
  kLogSoftmax,
  kLog,
  kExp,
  kSquare,
  kSum,
  kMean,
  kConcat,
  kGaussianSample,
  kPairwiseSqdist,
  kOffdiagMean,
};

const char* op_name(OpKind k);

struct Node {
  OpKind kind = OpKind::kLeaf;
  std::array<NodeId, 2> in{kNoNode, kNoNode};
  std::uint8_t arity = 0;
  bool needs_grad = false;
  Tensor out;
  // Op attributes, frozen at node creation so re-evaluation (finite
  // differences) sees the identical function.
  float c0 = 0.0f;
  float c1 = 0.0f;
  std::vector<float> noise;  // reparameterization draw
};

// Eager reverse-mode graph over float32 tensors. Ops execute on creation;
// reductions and inner products accumulate in float64. Nodes are appended in
// topological order by construction.
class Graph {
 public:
  explicit Graph(std::uint64_t seed = 0);

  NodeId leaf(Tensor t);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId bias_add(NodeId m, NodeId bias);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, float c);
  NodeId relu(NodeId a);
  NodeId tanh(NodeId a);
  NodeId clamp(NodeId a, float lo, float hi);
  NodeId softmax(NodeId a);
  NodeId log_softmax(NodeId a);
  NodeId log(NodeId a);
  NodeId exp(NodeId a);
  NodeId square(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId concat(NodeId a, NodeId b);
  NodeId gaussian_sample(NodeId mu, NodeId logvar);
  NodeId pairwise_sqdist(NodeId a, NodeId b);
  NodeId offdiag_mean(NodeId a);

  // Generic dispatch for the attribute-free op kinds (plus gaussian_sample,
  // which draws its noise internally).
  NodeId forward_op(OpKind kind, std::span<const NodeId> inputs);

  const Tensor& value(NodeId id) const;
  const Node& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  // Value of a single-element node.
  double scalar(NodeId id) const;

  using GradMap = std::unordered_map<NodeId, Tensor>;
  // Gradient of a scalar loss w.r.t. every requires_grad leaf (zero tensors
  // for leaves the loss does not reach). Constant leaves are absent.
  GradMap backward(NodeId loss) const;

  // Re-evaluates the graph up to `loss` in float64 with one leaf coordinate
  // overridden; frozen attributes are reused. `kink_sig`, when given, receives
  // the relu/clamp activation pattern so finite differencing can skip
  // coordinates that straddle a non-differentiable point.
  double eval_f64(NodeId loss, NodeId leaf_id, std::size_t coord, double value,
                  std::vector<std::uint8_t>* kink_sig = nullptr) const;

  CounterRng& rng() { return rng_; }

 private:
  NodeId push(Node n);
  void run_forward(Node& n) const;

  std::vector<Node> nodes_;
  mutable CounterRng rng_;
};

// p <- p - eta * g, elementwise.
void sgd_step(Tensor& param, const Tensor& grad, float eta);
void sgd_step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, float eta);

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates excluded at relu/clamp kinks
};

// Central finite differences of a scalar loss w.r.t. one leaf, against the
// analytic gradient. Returns max over entries of
// |analytic - fd| / max(1, |analytic|). Coordinates whose perturbed
// evaluations land on different sides of a relu/clamp kink are skipped.
FiniteDiffReport finite_diff_check_detailed(Graph& g, NodeId loss, NodeId leaf,
                                            double step);
double finite_diff_check(Graph& g, NodeId loss, NodeId leaf, double step);

}  // namespace cachenet::ad
