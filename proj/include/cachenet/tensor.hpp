// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "cachenet/rng.hpp"

namespace cachenet {

// Dense row-major float32 tensor. Dims are all positive; product(dims) always
// equals data.size().
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<float> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<std::size_t> d, std::vector<float> v, bool rg = false);

  static Tensor zeros(std::vector<std::size_t> d, bool rg = false);
  static Tensor full(std::vector<std::size_t> d, float v, bool rg = false);
  static Tensor scalar(float v, bool rg = false);
  static Tensor row(std::vector<float> v, bool rg = false);
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<float> v,
                       bool rg = false);
  // Entries ~ N(0, scale^2).
  static Tensor randn(std::vector<std::size_t> d, CounterRng& rng, float scale,
                      bool rg = false);

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return dims.size(); }
  // 2-D view helpers; a 1-D tensor reads as a single row.
  std::size_t rows() const { return dims.size() < 2 ? 1 : dims[0]; }
  std::size_t cols() const { return dims.empty() ? 0 : dims.back(); }

  float& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool finite() const;
  bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

}  // namespace cachenet
