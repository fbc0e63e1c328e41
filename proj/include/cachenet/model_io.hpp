// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cachenet/partition.hpp"
#include "cachenet/stacked_vae.hpp"
#include "cachenet/submodels.hpp"
#include "cachenet/tensor.hpp"

namespace cachenet {

// Model blob: "CNMD" magic, version byte, tensor count (unsigned 16-bit
// big-endian), then per tensor a rank byte, big-endian 32-bit dims, and
// row-major little-endian 32-bit float data; a big-endian CRC-32 of all
// preceding bytes closes the blob. Float bit patterns survive round trips
// exactly.
inline constexpr std::uint8_t kBlobVersion = 0x01;

std::vector<std::uint8_t> serialize_model(
    const std::vector<const Tensor*>& tensors);
// FormatError on structural problems, IntegrityError on checksum mismatch.
std::vector<Tensor> deserialize_model(std::span<const std::uint8_t> blob);

// A submodel travels as its six tensors in view order (trunk then head).
std::vector<std::uint8_t> serialize_submodel(const Submodel& m);
Submodel deserialize_submodel(std::span<const std::uint8_t> blob);

// The encoder stack travels as both stages' parameters in stage order.
std::vector<std::uint8_t> serialize_encoder(const StackedVae& vae);
StackedVae deserialize_encoder(std::span<const std::uint8_t> blob,
                               const StackedVaeConfig& cfg);

// A trained bundle on disk: meta.cfg (flat key=value), encoder.cnmd, and
// submodel_<k>.cnmd for every branch. Each submodel blob carries its own
// copy of the shared trunk, so one blob is enough to run that branch.
struct Bundle {
  StackedVaeConfig vae_cfg;
  PartitionConfig pcfg;
  SubmodelArch arch;
  StackedVae vae;
  std::vector<Submodel> submodels;
};

void save_bundle(const std::string& dir, const StackedVae& vae,
                 const Generator& gen, const PartitionConfig& pcfg);
Bundle load_bundle(const std::string& dir);

}  // namespace cachenet
