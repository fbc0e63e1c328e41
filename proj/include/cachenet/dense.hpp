// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

#include "cachenet/errors.hpp"
#include "cachenet/tensor.hpp"

namespace cachenet {

// Plain float32 building blocks with the same accumulation semantics as the
// graph kernels (double accumulators in inner products), so an inference
// pass reproduces a recorded forward pass bit for bit.

inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.rows() || w.cols() != b.numel())
    throw ShapeError("dense: dimension mismatch");
  Tensor out = Tensor::zeros({x.rows(), w.cols()});
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l)
        acc += static_cast<double>(x.data[i * k + l]) *
               static_cast<double>(w.data[l * m + j]);
      out.data[i * m + j] = static_cast<float>(acc) + b.data[j];
    }
  return out;
}

inline Tensor relu(Tensor t) {
  for (auto& v : t.data) v = v > 0.0f ? v : 0.0f;
  return t;
}

inline Tensor clamp(Tensor t, float lo, float hi) {
  for (auto& v : t.data) v = std::min(std::max(v, lo), hi);
  return t;
}

// Row-wise softmax / log-softmax with the max-shift and double-precision
// normalizer used by the graph kernels.
inline Tensor softmax_rows(const Tensor& t, bool log_mode = false) {
  Tensor out = Tensor::zeros(t.dims);
  const std::size_t rows = t.rows(), cols = t.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = t.data.data() + r * cols;
    float* yr = out.data.data() + r * cols;
    float mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      denom += std::exp(static_cast<double>(xr[c] - mx));
    if (log_mode) {
      const double ld = std::log(denom);
      for (std::size_t c = 0; c < cols; ++c)
        yr[c] = static_cast<float>(static_cast<double>(xr[c] - mx) - ld);
    } else {
      for (std::size_t c = 0; c < cols; ++c)
        yr[c] = static_cast<float>(std::exp(static_cast<double>(xr[c] - mx)) / denom);
    }
  }
  return out;
}

}  // namespace cachenet
