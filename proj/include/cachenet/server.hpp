// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cachenet/codec.hpp"
#include "cachenet/model_io.hpp"

namespace cachenet {

// Edge-side request handler: routes a frame through the encoder stack to an
// angular partition, answers with the selected submodel's full-fidelity
// prediction, and hands out submodel blobs on demand. The model store is
// read-only after construction, so one instance can serve any number of
// connections concurrently.
class EdgeServer {
 public:
  explicit EdgeServer(Bundle bundle);

  // Full edge inference for one frame: encode -> latent angle -> partition
  // selection -> prediction by the selected submodel. Throws ContractError
  // on a width mismatch and DomainError on non-finite input.
  InferResp infer(std::span<const float> frame) const;

  // Total request -> response map: INFER_REQ and MODEL_REQ get their typed
  // responses, everything else an ERROR message. Never throws.
  WireMessage handle(const WireMessage& request) const;

  const Bundle& bundle() const { return bundle_; }

 private:
  Bundle bundle_;
  std::vector<double> zeta_;  // sector midpoints for the angular code
  double sigma_ = 0.0;
  std::vector<std::vector<std::uint8_t>> blobs_;  // pre-serialized submodels
};

}  // namespace cachenet
