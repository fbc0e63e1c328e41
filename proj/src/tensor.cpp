// SPDX-License-Identifier: Apache-2.0
#include "cachenet/tensor.hpp"

#include <cmath>

#include "cachenet/errors.hpp"

namespace cachenet {

namespace {
std::size_t checked_numel(const std::vector<std::size_t>& dims) {
  if (dims.empty()) throw ShapeError("tensor must have at least one dim");
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> d, std::vector<float> v, bool rg)
    : dims(std::move(d)), data(std::move(v)), requires_grad(rg) {
  if (checked_numel(dims) != data.size())
    throw ShapeError("tensor data length does not match dims");
}

Tensor Tensor::zeros(std::vector<std::size_t> d, bool rg) {
  std::size_t n = checked_numel(d);
  return Tensor(std::move(d), std::vector<float>(n, 0.0f), rg);
}

Tensor Tensor::full(std::vector<std::size_t> d, float v, bool rg) {
  std::size_t n = checked_numel(d);
  return Tensor(std::move(d), std::vector<float>(n, v), rg);
}

Tensor Tensor::scalar(float v, bool rg) { return Tensor({1}, {v}, rg); }

Tensor Tensor::row(std::vector<float> v, bool rg) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v), rg);
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<float> v,
                      bool rg) {
  return Tensor({r, c}, std::move(v), rg);
}

Tensor Tensor::randn(std::vector<std::size_t> d, CounterRng& rng, float scale,
                     bool rg) {
  std::size_t n = checked_numel(d);
  std::vector<float> v(n);
  for (auto& x : v) x = rng.next_normal() * scale;
  return Tensor(std::move(d), std::move(v), rg);
}

bool Tensor::finite() const {
  for (float x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace cachenet
