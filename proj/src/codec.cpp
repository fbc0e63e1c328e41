// SPDX-License-Identifier: Apache-2.0
#include "cachenet/codec.hpp"

#include <array>
#include <bit>
#include <cstring>

#include "cachenet/errors.hpp"

namespace cachenet {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{0x43, 0x4E, 0x45, 0x54};  // CNET

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<std::uint8_t>(bits));
  out.push_back(static_cast<std::uint8_t>(bits >> 8));
  out.push_back(static_cast<std::uint8_t>(bits >> 16));
  out.push_back(static_cast<std::uint8_t>(bits >> 24));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

bool valid_type(std::uint8_t t) { return t >= 0x01 && t <= 0x05; }

}  // namespace

const char* decode_status_name(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::kOk: return "ok";
    case DecodeStatus::kNeedMoreData: return "need more data";
    case DecodeStatus::kBadMagic: return "bad magic";
    case DecodeStatus::kBadVersion: return "bad version";
    case DecodeStatus::kBadType: return "bad message type";
    case DecodeStatus::kOversize: return "payload over cap";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode_message(const WireMessage& m) {
  if (m.payload.size() > kMaxPayload)
    throw ResourceError("frame payload exceeds the 64 MiB cap");
  if (!valid_type(static_cast<std::uint8_t>(m.type)))
    throw ProtocolError("unknown message type");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderLen + m.payload.size());
  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(m.type));
  put_u64(out, m.payload.size());
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

DecodeStatus try_decode_message(std::span<const std::uint8_t> bytes,
                                WireMessage& out, std::size_t* consumed) {
  if (bytes.size() < kHeaderLen) return DecodeStatus::kNeedMoreData;
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    return DecodeStatus::kBadMagic;
  if (bytes[4] != kWireVersion) return DecodeStatus::kBadVersion;
  if (!valid_type(bytes[5])) return DecodeStatus::kBadType;
  const std::uint64_t len = get_u64(bytes.data() + 6);
  if (len > kMaxPayload) return DecodeStatus::kOversize;
  if (bytes.size() < kHeaderLen + len) return DecodeStatus::kNeedMoreData;
  out.type = static_cast<MsgType>(bytes[5]);
  out.payload.assign(bytes.begin() + kHeaderLen,
                     bytes.begin() + kHeaderLen + static_cast<std::size_t>(len));
  if (consumed != nullptr) *consumed = kHeaderLen + static_cast<std::size_t>(len);
  return DecodeStatus::kOk;
}

WireMessage decode_message(std::span<const std::uint8_t> bytes) {
  WireMessage m;
  std::size_t consumed = 0;
  switch (try_decode_message(bytes, m, &consumed)) {
    case DecodeStatus::kOk:
      if (consumed != bytes.size())
        throw FramingError("trailing bytes after frame");
      return m;
    case DecodeStatus::kNeedMoreData:
      throw FramingError("frame truncated");
    case DecodeStatus::kBadMagic:
      throw ProtocolError("bad magic");
    case DecodeStatus::kBadVersion:
      throw ProtocolError("bad version");
    case DecodeStatus::kBadType:
      throw ProtocolError("bad message type");
    case DecodeStatus::kOversize:
      throw ResourceError("payload over cap");
  }
  throw ProtocolError("unreachable");
}

void FrameParser::feed(std::span<const std::uint8_t> bytes) {
  // Drop the consumed prefix before growing, keeping the buffer bounded by
  // one frame plus one read chunk.
  if (pos_ > 0) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

DecodeStatus FrameParser::try_extract(WireMessage& out) {
  if (poisoned_ != DecodeStatus::kOk) return poisoned_;
  std::size_t consumed = 0;
  const DecodeStatus s = try_decode_message(
      std::span<const std::uint8_t>(buf_).subspan(pos_), out, &consumed);
  if (s == DecodeStatus::kOk) {
    pos_ += consumed;
    return s;
  }
  if (s != DecodeStatus::kNeedMoreData) poisoned_ = s;
  return s;
}

std::vector<std::uint8_t> encode_infer_req(const InferReq& r) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * r.frame.size());
  put_u32(out, static_cast<std::uint32_t>(r.frame.size()));
  for (float v : r.frame) put_f32(out, v);
  return out;
}

std::vector<std::uint8_t> encode_infer_resp(const InferResp& r) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * r.probs.size());
  put_u32(out, r.label);
  put_u32(out, r.partition);
  put_u32(out, static_cast<std::uint32_t>(r.probs.size()));
  for (float v : r.probs) put_f32(out, v);
  return out;
}

std::vector<std::uint8_t> encode_model_req(const ModelReq& r) {
  std::vector<std::uint8_t> out;
  put_u32(out, r.k);
  return out;
}

std::vector<std::uint8_t> encode_error(const ErrorMsg& e) {
  std::vector<std::uint8_t> out;
  put_u32(out, e.code);
  out.insert(out.end(), e.text.begin(), e.text.end());
  return out;
}

bool try_decode_infer_req(std::span<const std::uint8_t> payload,
                          InferReq& out) {
  if (payload.size() < 4) return false;
  const std::uint32_t n = get_u32(payload.data());
  if (payload.size() != 4 + 4ull * n) return false;
  out.frame.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    out.frame[i] = get_f32(payload.data() + 4 + 4 * i);
  return true;
}

bool try_decode_infer_resp(std::span<const std::uint8_t> payload,
                           InferResp& out) {
  if (payload.size() < 12) return false;
  const std::uint32_t n = get_u32(payload.data() + 8);
  if (payload.size() != 12 + 4ull * n) return false;
  out.label = get_u32(payload.data());
  out.partition = get_u32(payload.data() + 4);
  out.probs.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    out.probs[i] = get_f32(payload.data() + 12 + 4 * i);
  return true;
}

bool try_decode_model_req(std::span<const std::uint8_t> payload,
                          ModelReq& out) {
  if (payload.size() != 4) return false;
  out.k = get_u32(payload.data());
  return true;
}

bool try_decode_error(std::span<const std::uint8_t> payload, ErrorMsg& out) {
  if (payload.size() < 4) return false;
  out.code = get_u32(payload.data());
  out.text.assign(payload.begin() + 4, payload.end());
  return true;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int bit = 0; bit < 8; ++bit)
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

}  // namespace cachenet
