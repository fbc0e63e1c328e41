// SPDX-License-Identifier: Apache-2.0
#include "cachenet/model_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "cachenet/codec.hpp"
#include "cachenet/errors.hpp"
#include "cachenet/kvconfig.hpp"

namespace cachenet {
namespace {

constexpr std::array<std::uint8_t, 4> kBlobMagic{0x43, 0x4E, 0x4D, 0x44};  // CNMD
constexpr std::size_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = (64ull << 20) / sizeof(float);

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

}  // namespace

std::vector<std::uint8_t> serialize_model(
    const std::vector<const Tensor*>& tensors) {
  if (tensors.size() > 0xFFFF)
    throw FormatError("too many tensors for one blob");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kBlobMagic.begin(), kBlobMagic.end());
  out.push_back(kBlobVersion);
  put_u16(out, static_cast<std::uint16_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    if (!t->finite()) throw DomainError("blob tensors must be finite");
    if (t->ndim() > kMaxRank) throw FormatError("tensor rank over limit");
    out.push_back(static_cast<std::uint8_t>(t->ndim()));
    for (std::size_t d : t->dims) {
      if (d > 0xFFFFFFFFull) throw FormatError("dimension over 32 bits");
      put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (float v : t->data) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      out.push_back(static_cast<std::uint8_t>(bits));
      out.push_back(static_cast<std::uint8_t>(bits >> 8));
      out.push_back(static_cast<std::uint8_t>(bits >> 16));
      out.push_back(static_cast<std::uint8_t>(bits >> 24));
    }
  }
  put_u32(out, crc32(out));
  return out;
}

std::vector<Tensor> deserialize_model(std::span<const std::uint8_t> blob) {
  if (blob.size() < kBlobMagic.size() + 1 + 2 + 4)
    throw FormatError("blob shorter than its fixed fields");
  if (!std::equal(kBlobMagic.begin(), kBlobMagic.end(), blob.begin()))
    throw FormatError("bad blob magic");
  if (blob[4] != kBlobVersion) throw FormatError("bad blob version");
  const std::uint32_t want = get_u32(blob.data() + blob.size() - 4);
  if (crc32(blob.first(blob.size() - 4)) != want)
    throw IntegrityError("blob checksum mismatch");

  const std::size_t count = (static_cast<std::size_t>(blob[5]) << 8) | blob[6];
  std::size_t pos = 7;
  const std::size_t end = blob.size() - 4;
  std::vector<Tensor> tensors;
  tensors.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (pos >= end) throw FormatError("blob truncated at tensor header");
    const std::size_t rank = blob[pos++];
    if (rank == 0 || rank > kMaxRank) throw FormatError("bad tensor rank");
    if (pos + 4 * rank > end) throw FormatError("blob truncated at dims");
    std::vector<std::size_t> dims(rank);
    std::uint64_t numel = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      dims[d] = get_u32(blob.data() + pos);
      pos += 4;
      if (dims[d] == 0) throw FormatError("zero dimension");
      numel *= dims[d];
      if (numel > kMaxElements) throw FormatError("tensor size over cap");
    }
    if (pos + 4 * numel > end) throw FormatError("blob truncated at data");
    std::vector<float> data(numel);
    for (std::uint64_t e = 0; e < numel; ++e) {
      const std::uint32_t bits =
          static_cast<std::uint32_t>(blob[pos]) |
          (static_cast<std::uint32_t>(blob[pos + 1]) << 8) |
          (static_cast<std::uint32_t>(blob[pos + 2]) << 16) |
          (static_cast<std::uint32_t>(blob[pos + 3]) << 24);
      data[e] = std::bit_cast<float>(bits);
      pos += 4;
    }
    tensors.emplace_back(std::move(dims), std::move(data));
  }
  if (pos != end) throw FormatError("trailing bytes inside blob");
  return tensors;
}

std::vector<std::uint8_t> serialize_submodel(const Submodel& m) {
  return serialize_model({&m.trunk_w1, &m.trunk_b1, &m.trunk_w2, &m.trunk_b2,
                          &m.head_w, &m.head_b});
}

Submodel deserialize_submodel(std::span<const std::uint8_t> blob) {
  std::vector<Tensor> t = deserialize_model(blob);
  if (t.size() != 6) throw FormatError("submodel blob needs six tensors");
  Submodel m{std::move(t[0]), std::move(t[1]), std::move(t[2]),
             std::move(t[3]), std::move(t[4]), std::move(t[5])};
  const std::size_t hidden = m.trunk_b1.numel();
  if (m.trunk_w1.ndim() != 2 || m.trunk_w2.ndim() != 2 ||
      m.head_w.ndim() != 2 || m.trunk_b1.ndim() != 1 ||
      m.trunk_b2.ndim() != 1 || m.head_b.ndim() != 1 ||
      m.trunk_w1.cols() != hidden || m.trunk_w2.rows() != hidden ||
      m.trunk_w2.cols() != m.trunk_b2.numel() ||
      m.head_w.rows() != m.trunk_b2.numel() ||
      m.head_w.cols() != m.head_b.numel())
    throw FormatError("submodel tensor shapes disagree");
  return m;
}

std::vector<std::uint8_t> serialize_encoder(const StackedVae& vae) {
  std::vector<const Tensor*> tensors = vae.stage1_params();
  const std::vector<const Tensor*> stage2 = vae.stage2_params();
  tensors.insert(tensors.end(), stage2.begin(), stage2.end());
  return serialize_model(tensors);
}

StackedVae deserialize_encoder(std::span<const std::uint8_t> blob,
                               const StackedVaeConfig& cfg) {
  std::vector<Tensor> t = deserialize_model(blob);
  StackedVae vae = StackedVae::init(cfg, 0);  // shapes, then overwritten
  std::vector<Tensor*> slots = vae.stage1_params();
  const std::vector<Tensor*> stage2 = vae.stage2_params();
  slots.insert(slots.end(), stage2.begin(), stage2.end());
  if (t.size() != slots.size())
    throw FormatError("encoder blob tensor count mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (t[i].dims != slots[i]->dims)
      throw FormatError("encoder tensor shape disagrees with config");
    *slots[i] = std::move(t[i]);
  }
  return vae;
}

namespace {

// Shortest-exact decimal so meta round-trips don't drift.
std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_bundle(const std::string& dir, const StackedVae& vae,
                 const Generator& gen, const PartitionConfig& pcfg) {
  std::filesystem::create_directories(dir);
  KvMap meta;
  meta["input_dim"] = std::to_string(vae.cfg.input_dim);
  meta["z_dim"] = std::to_string(vae.cfg.z_dim);
  meta["hidden_dim"] = std::to_string(vae.cfg.hidden_dim);
  meta["alpha_info"] = fmt_g(vae.cfg.alpha_info);
  meta["lambda_scale"] = fmt_g(vae.cfg.lambda_scale);
  meta["k"] = std::to_string(gen.num_branches());
  meta["tau"] = fmt_g(pcfg.tau);
  meta["gamma"] = fmt_g(pcfg.gamma);
  meta["alpha_mix"] = fmt_g(pcfg.alpha_mix);
  meta["epsilon_std"] = fmt_g(pcfg.epsilon_std);
  meta["arch_hidden"] = std::to_string(gen.arch.hidden_dim);
  meta["num_classes"] = std::to_string(gen.arch.num_classes);
  save_kv_file(dir + "/meta.cfg", meta);

  write_file_atomic(dir + "/encoder.cnmd",
                    std::span<const std::uint8_t>(serialize_encoder(vae)));
  for (std::size_t k = 0; k < gen.num_branches(); ++k)
    write_file_atomic(
        dir + "/submodel_" + std::to_string(k) + ".cnmd",
        std::span<const std::uint8_t>(serialize_submodel(gen.materialize(k))));
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Bundle load_bundle(const std::string& dir) {
  const KvMap meta = load_kv_file(dir + "/meta.cfg");
  Bundle b;
  b.vae_cfg.input_dim = static_cast<std::size_t>(kv_int(meta, "input_dim"));
  b.vae_cfg.z_dim = static_cast<std::size_t>(kv_int(meta, "z_dim"));
  b.vae_cfg.hidden_dim = static_cast<std::size_t>(kv_int(meta, "hidden_dim"));
  b.vae_cfg.alpha_info = static_cast<float>(kv_double(meta, "alpha_info"));
  b.vae_cfg.lambda_scale = static_cast<float>(kv_double(meta, "lambda_scale"));
  b.pcfg.k = static_cast<std::size_t>(kv_int(meta, "k"));
  b.pcfg.tau = kv_double(meta, "tau");
  b.pcfg.gamma = kv_double(meta, "gamma");
  b.pcfg.alpha_mix = kv_double(meta, "alpha_mix");
  b.pcfg.epsilon_std = kv_double(meta, "epsilon_std");
  b.arch.input_dim = b.vae_cfg.input_dim;
  b.arch.hidden_dim = static_cast<std::size_t>(kv_int(meta, "arch_hidden"));
  b.arch.num_classes = static_cast<std::size_t>(kv_int(meta, "num_classes"));
  b.vae_cfg.validate();
  b.pcfg.validate();

  b.vae = deserialize_encoder(read_file(dir + "/encoder.cnmd"), b.vae_cfg);
  b.submodels.reserve(b.pcfg.k);
  for (std::size_t k = 0; k < b.pcfg.k; ++k) {
    Submodel m = deserialize_submodel(
        read_file(dir + "/submodel_" + std::to_string(k) + ".cnmd"));
    if (m.trunk_w1.rows() != b.arch.input_dim ||
        m.head_b.numel() != b.arch.num_classes)
      throw FormatError("submodel shapes disagree with bundle meta");
    b.submodels.push_back(std::move(m));
  }
  return b;
}

}  // namespace cachenet
