// SPDX-License-Identifier: Apache-2.0
#include "cachenet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "cachenet/errors.hpp"

namespace cachenet::ad {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kClamp: return "clamp";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLog: return "log";
    case OpKind::kExp: return "exp";
    case OpKind::kSquare: return "square";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kConcat: return "concat";
    case OpKind::kGaussianSample: return "gaussian_sample";
    case OpKind::kPairwiseSqdist: return "pairwise_sqdist";
    case OpKind::kOffdiagMean: return "offdiag_mean";
  }
  return "?";
}

namespace {

// Forward kernels, shared between the float32 training path and the float64
// re-evaluation used by the finite-difference oracle. Reductions and inner
// products accumulate in double either way.

template <typename T>
void k_matmul(const T* a, const T* b, T* out, std::size_t n, std::size_t k,
              std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l)
        acc += static_cast<double>(a[i * k + l]) *
               static_cast<double>(b[l * m + j]);
      out[i * m + j] = static_cast<T>(acc);
    }
}

template <typename T>
void k_softmax(const T* x, T* y, std::size_t rows, std::size_t cols,
               bool log_mode) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T* yr = y + r * cols;
    T mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      denom += std::exp(static_cast<double>(xr[c] - mx));
    if (log_mode) {
      const double ld = std::log(denom);
      for (std::size_t c = 0; c < cols; ++c)
        yr[c] = static_cast<T>(static_cast<double>(xr[c] - mx) - ld);
    } else {
      for (std::size_t c = 0; c < cols; ++c)
        yr[c] =
            static_cast<T>(std::exp(static_cast<double>(xr[c] - mx)) / denom);
    }
  }
}

template <typename T>
void k_pairwise_sqdist(const T* a, const T* b, T* out, std::size_t n,
                       std::size_t m, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < d; ++l) {
        const double diff =
            static_cast<double>(a[i * d + l]) - static_cast<double>(b[j * d + l]);
        acc += diff * diff;
      }
      out[i * m + j] = static_cast<T>(acc);
    }
}

struct InputView {
  const Tensor* meta = nullptr;  // dims of the input
};

// Evaluates one op. `sig`, when non-null, accumulates the relu/clamp
// activation pattern for kink detection.
template <typename T>
void eval_node(const Node& n, const std::array<const Tensor*, 2>& meta,
               const std::array<const T*, 2>& in, T* out,
               std::vector<std::uint8_t>* sig) {
  const std::size_t ne = n.out.numel();
  switch (n.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatmul:
      k_matmul(in[0], in[1], out, meta[0]->rows(), meta[0]->cols(),
               meta[1]->cols());
      break;
    case OpKind::kAdd:
      for (std::size_t i = 0; i < ne; ++i) out[i] = in[0][i] + in[1][i];
      break;
    case OpKind::kBiasAdd: {
      const std::size_t c = meta[1]->numel();
      for (std::size_t i = 0; i < ne; ++i) out[i] = in[0][i] + in[1][i % c];
      break;
    }
    case OpKind::kSub:
      for (std::size_t i = 0; i < ne; ++i) out[i] = in[0][i] - in[1][i];
      break;
    case OpKind::kMul:
      for (std::size_t i = 0; i < ne; ++i) out[i] = in[0][i] * in[1][i];
      break;
    case OpKind::kScale:
      for (std::size_t i = 0; i < ne; ++i)
        out[i] = in[0][i] * static_cast<T>(n.c0);
      break;
    case OpKind::kRelu:
      for (std::size_t i = 0; i < ne; ++i) {
        const bool pos = in[0][i] > T(0);
        out[i] = pos ? in[0][i] : T(0);
        if (sig) sig->push_back(pos ? 1 : 0);
      }
      break;
    case OpKind::kTanh:
      for (std::size_t i = 0; i < ne; ++i) out[i] = std::tanh(in[0][i]);
      break;
    case OpKind::kClamp:
      for (std::size_t i = 0; i < ne; ++i) {
        const T lo = static_cast<T>(n.c0), hi = static_cast<T>(n.c1);
        std::uint8_t zone = 1;
        if (in[0][i] < lo) {
          out[i] = lo;
          zone = 0;
        } else if (in[0][i] > hi) {
          out[i] = hi;
          zone = 2;
        } else {
          out[i] = in[0][i];
        }
        if (sig) sig->push_back(zone);
      }
      break;
    case OpKind::kSoftmax:
      k_softmax(in[0], out, meta[0]->rows(), meta[0]->cols(), false);
      break;
    case OpKind::kLogSoftmax:
      k_softmax(in[0], out, meta[0]->rows(), meta[0]->cols(), true);
      break;
    case OpKind::kLog:
      for (std::size_t i = 0; i < ne; ++i) out[i] = std::log(in[0][i]);
      break;
    case OpKind::kExp:
      for (std::size_t i = 0; i < ne; ++i) out[i] = std::exp(in[0][i]);
      break;
    case OpKind::kSquare:
      for (std::size_t i = 0; i < ne; ++i) out[i] = in[0][i] * in[0][i];
      break;
    case OpKind::kSum: {
      double acc = 0.0;
      const std::size_t m = meta[0]->numel();
      for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(in[0][i]);
      out[0] = static_cast<T>(acc);
      break;
    }
    case OpKind::kMean: {
      double acc = 0.0;
      const std::size_t m = meta[0]->numel();
      for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(in[0][i]);
      out[0] = static_cast<T>(acc / static_cast<double>(m));
      break;
    }
    case OpKind::kConcat: {
      const std::size_t rows = meta[0]->rows();
      const std::size_t ca = meta[0]->cols(), cb = meta[1]->cols();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < ca; ++c)
          out[r * (ca + cb) + c] = in[0][r * ca + c];
        for (std::size_t c = 0; c < cb; ++c)
          out[r * (ca + cb) + ca + c] = in[1][r * cb + c];
      }
      break;
    }
    case OpKind::kGaussianSample:
      for (std::size_t i = 0; i < ne; ++i)
        out[i] = in[0][i] +
                 std::exp(static_cast<T>(0.5) * in[1][i]) *
                     static_cast<T>(n.noise[i]);
      break;
    case OpKind::kPairwiseSqdist:
      k_pairwise_sqdist(in[0], in[1], out, meta[0]->rows(), meta[1]->rows(),
                        meta[0]->cols());
      break;
    case OpKind::kOffdiagMean: {
      const std::size_t nn = meta[0]->rows();
      double acc = 0.0;
      for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j)
          if (i != j) acc += static_cast<double>(in[0][i * nn + j]);
      out[0] = static_cast<T>(acc / static_cast<double>(nn * (nn - 1)));
      break;
    }
  }
}

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

Graph::Graph(std::uint64_t seed) : rng_(seed, /*stream=*/0x6772) {}

NodeId Graph::push(Node n) {
  if (n.kind == OpKind::kLeaf) {
    n.needs_grad = n.out.requires_grad;
  } else {
    n.needs_grad = false;
    for (std::uint8_t i = 0; i < n.arity; ++i)
      n.needs_grad = n.needs_grad || nodes_[n.in[i]].needs_grad;
    run_forward(n);
  }
  if (!n.out.finite())
    throw DomainError(std::string(op_name(n.kind)) +
                      " produced non-finite values");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::run_forward(Node& n) const {
  std::array<const Tensor*, 2> meta{nullptr, nullptr};
  std::array<const float*, 2> in{nullptr, nullptr};
  for (std::uint8_t i = 0; i < n.arity; ++i) {
    meta[i] = &nodes_[n.in[i]].out;
    in[i] = nodes_[n.in[i]].out.data.data();
  }
  eval_node<float>(n, meta, in, n.out.data.data(), nullptr);
}

NodeId Graph::leaf(Tensor t) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.out = std::move(t);
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const { return nodes_.at(id).out; }
const Node& Graph::node(NodeId id) const { return nodes_.at(id); }

double Graph::scalar(NodeId id) const {
  const Tensor& t = nodes_.at(id).out;
  if (t.numel() != 1) throw ContractError("scalar() on non-scalar node");
  return static_cast<double>(t.data[0]);
}

namespace {
Node make_op(OpKind k, NodeId a, Tensor out) {
  Node n;
  n.kind = k;
  n.in = {a, kNoNode};
  n.arity = 1;
  n.out = std::move(out);
  return n;
}
Node make_op2(OpKind k, NodeId a, NodeId b, Tensor out) {
  Node n;
  n.kind = k;
  n.in = {a, b};
  n.arity = 2;
  n.out = std::move(out);
  return n;
}
}  // namespace

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.ndim() == 2 && tb.ndim() == 2, "matmul expects 2-D inputs");
  require(ta.cols() == tb.rows(), "matmul inner dims mismatch");
  return push(make_op2(OpKind::kMatmul, a, b,
                       Tensor::zeros({ta.rows(), tb.cols()})));
}

NodeId Graph::add(NodeId a, NodeId b) {
  require(value(a).same_shape(value(b)), "add shape mismatch");
  return push(make_op2(OpKind::kAdd, a, b, Tensor::zeros(value(a).dims)));
}

NodeId Graph::bias_add(NodeId m, NodeId bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  require(tb.ndim() == 1, "bias_add bias must be 1-D");
  require(tm.cols() == tb.numel(), "bias_add width mismatch");
  return push(make_op2(OpKind::kBiasAdd, m, bias, Tensor::zeros(tm.dims)));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  require(value(a).same_shape(value(b)), "sub shape mismatch");
  return push(make_op2(OpKind::kSub, a, b, Tensor::zeros(value(a).dims)));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  require(value(a).same_shape(value(b)), "mul shape mismatch");
  return push(make_op2(OpKind::kMul, a, b, Tensor::zeros(value(a).dims)));
}

NodeId Graph::scale(NodeId a, float c) {
  Node n = make_op(OpKind::kScale, a, Tensor::zeros(value(a).dims));
  n.c0 = c;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  return push(make_op(OpKind::kRelu, a, Tensor::zeros(value(a).dims)));
}

NodeId Graph::tanh(NodeId a) {
  return push(make_op(OpKind::kTanh, a, Tensor::zeros(value(a).dims)));
}

NodeId Graph::clamp(NodeId a, float lo, float hi) {
  require(lo <= hi, "clamp bounds inverted");
  Node n = make_op(OpKind::kClamp, a, Tensor::zeros(value(a).dims));
  n.c0 = lo;
  n.c1 = hi;
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId a) {
  const Tensor& t = value(a);
  if (t.cols() == 0) throw DomainError("softmax on empty axis");
  require(t.ndim() <= 2, "softmax expects 1-D or 2-D input");
  return push(make_op(OpKind::kSoftmax, a, Tensor::zeros(t.dims)));
}

NodeId Graph::log_softmax(NodeId a) {
  const Tensor& t = value(a);
  if (t.cols() == 0) throw DomainError("log_softmax on empty axis");
  require(t.ndim() <= 2, "log_softmax expects 1-D or 2-D input");
  return push(make_op(OpKind::kLogSoftmax, a, Tensor::zeros(t.dims)));
}

NodeId Graph::log(NodeId a) {
  return push(make_op(OpKind::kLog, a, Tensor::zeros(value(a).dims)));
}

NodeId Graph::exp(NodeId a) {
  return push(make_op(OpKind::kExp, a, Tensor::zeros(value(a).dims)));
}

NodeId Graph::square(NodeId a) {
  return push(make_op(OpKind::kSquare, a, Tensor::zeros(value(a).dims)));
}

NodeId Graph::sum(NodeId a) {
  return push(make_op(OpKind::kSum, a, Tensor::zeros({1})));
}

NodeId Graph::mean(NodeId a) {
  return push(make_op(OpKind::kMean, a, Tensor::zeros({1})));
}

NodeId Graph::concat(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.ndim() == tb.ndim() && ta.ndim() <= 2, "concat rank mismatch");
  require(ta.rows() == tb.rows(), "concat row mismatch");
  Tensor out = ta.ndim() == 1 ? Tensor::zeros({ta.cols() + tb.cols()})
                              : Tensor::zeros({ta.rows(), ta.cols() + tb.cols()});
  return push(make_op2(OpKind::kConcat, a, b, std::move(out)));
}

NodeId Graph::gaussian_sample(NodeId mu, NodeId logvar) {
  const Tensor& tm = value(mu);
  require(tm.same_shape(value(logvar)), "gaussian_sample shape mismatch");
  Node n = make_op2(OpKind::kGaussianSample, mu, logvar, Tensor::zeros(tm.dims));
  n.noise.resize(tm.numel());
  for (auto& e : n.noise) e = rng_.next_normal();
  return push(std::move(n));
}

NodeId Graph::pairwise_sqdist(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.ndim() == 2 && tb.ndim() == 2, "pairwise_sqdist expects 2-D");
  require(ta.cols() == tb.cols(), "pairwise_sqdist feature dims mismatch");
  return push(make_op2(OpKind::kPairwiseSqdist, a, b,
                       Tensor::zeros({ta.rows(), tb.rows()})));
}

NodeId Graph::offdiag_mean(NodeId a) {
  const Tensor& t = value(a);
  require(t.ndim() == 2 && t.rows() == t.cols(), "offdiag_mean expects square");
  require(t.rows() >= 2, "offdiag_mean needs at least a 2x2 matrix");
  return push(make_op(OpKind::kOffdiagMean, a, Tensor::zeros({1})));
}

NodeId Graph::forward_op(OpKind kind, std::span<const NodeId> ins) {
  auto expect = [&](std::size_t k) {
    if (ins.size() != k)
      throw ContractError(std::string("forward_op(") + op_name(kind) +
                          "): wrong input count");
  };
  switch (kind) {
    case OpKind::kMatmul: expect(2); return matmul(ins[0], ins[1]);
    case OpKind::kAdd: expect(2); return add(ins[0], ins[1]);
    case OpKind::kSub: expect(2); return sub(ins[0], ins[1]);
    case OpKind::kMul: expect(2); return mul(ins[0], ins[1]);
    case OpKind::kBiasAdd: expect(2); return bias_add(ins[0], ins[1]);
    case OpKind::kRelu: expect(1); return relu(ins[0]);
    case OpKind::kTanh: expect(1); return tanh(ins[0]);
    case OpKind::kSoftmax: expect(1); return softmax(ins[0]);
    case OpKind::kLogSoftmax: expect(1); return log_softmax(ins[0]);
    case OpKind::kLog: expect(1); return log(ins[0]);
    case OpKind::kExp: expect(1); return exp(ins[0]);
    case OpKind::kSquare: expect(1); return square(ins[0]);
    case OpKind::kSum: expect(1); return sum(ins[0]);
    case OpKind::kMean: expect(1); return mean(ins[0]);
    case OpKind::kConcat: expect(2); return concat(ins[0], ins[1]);
    case OpKind::kGaussianSample:
      expect(2);
      return gaussian_sample(ins[0], ins[1]);
    case OpKind::kPairwiseSqdist:
      expect(2);
      return pairwise_sqdist(ins[0], ins[1]);
    case OpKind::kOffdiagMean: expect(1); return offdiag_mean(ins[0]);
    default:
      throw ContractError(std::string("forward_op: ") + op_name(kind) +
                          " needs attributes; use the typed builder");
  }
}

Graph::GradMap Graph::backward(NodeId loss) const {
  if (loss >= nodes_.size()) throw ContractError("backward: bad loss node");
  if (nodes_[loss].out.numel() != 1)
    throw ContractError("backward: loss must be scalar");

  std::vector<std::vector<float>> grads(nodes_.size());
  auto ensure = [&](NodeId id) -> std::vector<float>& {
    if (grads[id].empty()) grads[id].assign(nodes_[id].out.numel(), 0.0f);
    return grads[id];
  };
  ensure(loss)[0] = 1.0f;

  for (NodeId id = loss + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.kind == OpKind::kLeaf || !n.needs_grad || grads[id].empty()) continue;
    const std::vector<float>& g = grads[id];
    const Tensor& out = n.out;
    const Tensor& i0 = nodes_[n.in[0]].out;
    const bool w0 = nodes_[n.in[0]].needs_grad;
    const bool w1 = n.arity > 1 && nodes_[n.in[1]].needs_grad;

    switch (n.kind) {
      case OpKind::kMatmul: {
        const Tensor& i1 = nodes_[n.in[1]].out;
        const std::size_t nr = i0.rows(), k = i0.cols(), m = i1.cols();
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t l = 0; l < k; ++l) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j)
                acc += static_cast<double>(g[i * m + j]) *
                       static_cast<double>(i1.data[l * m + j]);
              ga[i * k + l] += static_cast<float>(acc);
            }
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < m; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < nr; ++i)
                acc += static_cast<double>(i0.data[i * k + l]) *
                       static_cast<double>(g[i * m + j]);
              gb[l * m + j] += static_cast<float>(acc);
            }
        }
        break;
      }
      case OpKind::kAdd:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        break;
      case OpKind::kBiasAdd: {
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          const std::size_t c = nodes_[n.in[1]].out.numel();
          for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t i = j; i < g.size(); i += c)
              acc += static_cast<double>(g[i]);
            gb[j] += static_cast<float>(acc);
          }
        }
        break;
      }
      case OpKind::kSub:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        break;
      case OpKind::kMul: {
        const Tensor& i1 = nodes_[n.in[1]].out;
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * i1.data[i];
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * i0.data[i];
        }
        break;
      }
      case OpKind::kScale:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c0;
        }
        break;
      case OpKind::kRelu:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (i0.data[i] > 0.0f) ga[i] += g[i];
        }
        break;
      case OpKind::kTanh:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * (1.0f - out.data[i] * out.data[i]);
        }
        break;
      case OpKind::kClamp:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (i0.data[i] >= n.c0 && i0.data[i] <= n.c1) ga[i] += g[i];
        }
        break;
      case OpKind::kSoftmax:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          const std::size_t rows = i0.rows(), cols = i0.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c)
              dot += static_cast<double>(g[r * cols + c]) *
                     static_cast<double>(out.data[r * cols + c]);
            for (std::size_t c = 0; c < cols; ++c)
              ga[r * cols + c] += static_cast<float>(
                  static_cast<double>(out.data[r * cols + c]) *
                  (static_cast<double>(g[r * cols + c]) - dot));
          }
        }
        break;
      case OpKind::kLogSoftmax:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          const std::size_t rows = i0.rows(), cols = i0.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c)
              s += static_cast<double>(g[r * cols + c]);
            for (std::size_t c = 0; c < cols; ++c)
              ga[r * cols + c] += static_cast<float>(
                  static_cast<double>(g[r * cols + c]) -
                  std::exp(static_cast<double>(out.data[r * cols + c])) * s);
          }
        }
        break;
      case OpKind::kLog:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] / i0.data[i];
        }
        break;
      case OpKind::kExp:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] * out.data[i];
        }
        break;
      case OpKind::kSquare:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += 2.0f * g[i] * i0.data[i];
        }
        break;
      case OpKind::kSum:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        }
        break;
      case OpKind::kMean:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          const float inv = 1.0f / static_cast<float>(ga.size());
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
        }
        break;
      case OpKind::kConcat: {
        const Tensor& i1 = nodes_[n.in[1]].out;
        const std::size_t rows = i0.rows();
        const std::size_t ca = i0.cols(), cb = i1.cols();
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ca; ++c)
              ga[r * ca + c] += g[r * (ca + cb) + c];
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cb; ++c)
              gb[r * cb + c] += g[r * (ca + cb) + ca + c];
        }
        break;
      }
      case OpKind::kGaussianSample: {
        // z = mu + exp(logvar/2) * eps; the frozen draw carries no gradient.
        if (w0) {
          auto& gm = ensure(n.in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (w1) {
          auto& gv = ensure(n.in[1]);
          for (std::size_t i = 0; i < g.size(); ++i)
            gv[i] += 0.5f * g[i] * (out.data[i] - i0.data[i]);
        }
        break;
      }
      case OpKind::kPairwiseSqdist: {
        const Tensor& i1 = nodes_[n.in[1]].out;
        const std::size_t nr = i0.rows(), m = i1.rows(), d = i0.cols();
        if (w0) {
          auto& ga = ensure(n.in[0]);
          for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t l = 0; l < d; ++l) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j)
                acc += 2.0 * static_cast<double>(g[i * m + j]) *
                       (static_cast<double>(i0.data[i * d + l]) -
                        static_cast<double>(i1.data[j * d + l]));
              ga[i * d + l] += static_cast<float>(acc);
            }
        }
        if (w1) {
          auto& gb = ensure(n.in[1]);
          for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = 0; l < d; ++l) {
              double acc = 0.0;
              for (std::size_t i = 0; i < nr; ++i)
                acc += 2.0 * static_cast<double>(g[i * m + j]) *
                       (static_cast<double>(i1.data[j * d + l]) -
                        static_cast<double>(i0.data[i * d + l]));
              gb[j * d + l] += static_cast<float>(acc);
            }
        }
        break;
      }
      case OpKind::kOffdiagMean:
        if (w0) {
          auto& ga = ensure(n.in[0]);
          const std::size_t nn = i0.rows();
          const float inv =
              1.0f / static_cast<float>(nn * (nn - 1));
          for (std::size_t i = 0; i < nn; ++i)
            for (std::size_t j = 0; j < nn; ++j)
              if (i != j) ga[i * nn + j] += g[0] * inv;
        }
        break;
      case OpKind::kLeaf:
        break;
    }
  }

  GradMap result;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.kind != OpKind::kLeaf || !n.out.requires_grad) continue;
    if (grads[id].empty()) grads[id].assign(n.out.numel(), 0.0f);
    result.emplace(id, Tensor(n.out.dims, std::move(grads[id])));
  }
  return result;
}

double Graph::eval_f64(NodeId loss, NodeId leaf_id, std::size_t coord,
                       double value, std::vector<std::uint8_t>* kink_sig) const {
  if (loss >= nodes_.size()) throw ContractError("eval_f64: bad loss node");
  if (kink_sig) kink_sig->clear();
  std::vector<std::vector<double>> vals(loss + 1);
  for (NodeId id = 0; id <= loss; ++id) {
    const Node& n = nodes_[id];
    vals[id].resize(n.out.numel());
    if (n.kind == OpKind::kLeaf) {
      for (std::size_t i = 0; i < n.out.numel(); ++i)
        vals[id][i] = static_cast<double>(n.out.data[i]);
      if (id == leaf_id) vals[id].at(coord) = value;
      continue;
    }
    std::array<const Tensor*, 2> meta{nullptr, nullptr};
    std::array<const double*, 2> in{nullptr, nullptr};
    for (std::uint8_t i = 0; i < n.arity; ++i) {
      meta[i] = &nodes_[n.in[i]].out;
      in[i] = vals[n.in[i]].data();
    }
    eval_node<double>(n, meta, in, vals[id].data(), kink_sig);
  }
  if (nodes_[loss].out.numel() != 1)
    throw ContractError("eval_f64: loss must be scalar");
  return vals[loss][0];
}

void sgd_step(Tensor& param, const Tensor& grad, float eta) {
  if (!param.same_shape(grad))
    throw ContractError("sgd_step: param/grad shape mismatch");
  for (std::size_t i = 0; i < param.data.size(); ++i)
    param.data[i] -= eta * grad.data[i];
}

void sgd_step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, float eta) {
  if (params.size() != grads.size())
    throw ContractError("sgd_step: param/grad count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    sgd_step(*params[i], *grads[i], eta);
}

FiniteDiffReport finite_diff_check_detailed(Graph& g, NodeId loss, NodeId leaf,
                                            double step) {
  if (g.value(loss).numel() != 1)
    throw ContractError("finite_diff_check: loss must be scalar");
  if (!(step > 0.0 && step <= 0.1))
    throw ContractError("finite_diff_check: step must be in (0, 0.1]");
  auto grads = g.backward(loss);
  auto it = grads.find(leaf);
  if (it == grads.end())
    throw ContractError("finite_diff_check: leaf carries no gradient");
  const Tensor& analytic = it->second;
  const Tensor& lt = g.value(leaf);

  FiniteDiffReport rep;
  std::vector<std::uint8_t> sig_p, sig_m;
  for (std::size_t i = 0; i < lt.numel(); ++i) {
    const double base = static_cast<double>(lt.data[i]);
    // Perturb to exactly representable float32 points and divide by the
    // realized interval.
    const float xp = static_cast<float>(base + step);
    const float xm = static_cast<float>(base - step);
    const double lp = g.eval_f64(loss, leaf, i, xp, &sig_p);
    const double lm = g.eval_f64(loss, leaf, i, xm, &sig_m);
    if (sig_p != sig_m) {
      ++rep.skipped;
      continue;
    }
    const double fd = (lp - lm) / (static_cast<double>(xp) - static_cast<double>(xm));
    const double a = static_cast<double>(analytic.data[i]);
    const double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
    rep.max_rel_err = std::max(rep.max_rel_err, err);
    ++rep.checked;
  }
  return rep;
}

double finite_diff_check(Graph& g, NodeId loss, NodeId leaf, double step) {
  return finite_diff_check_detailed(g, loss, leaf, step).max_rel_err;
}

}  // namespace cachenet::ad
