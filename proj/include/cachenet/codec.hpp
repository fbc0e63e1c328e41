// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cachenet {

// Wire frame: "CNET" magic, version byte, type byte, unsigned 64-bit
// big-endian payload length, then the payload. Integers in headers are
// big-endian throughout; tensor data stays little-endian 32-bit floats.
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kHeaderLen = 14;
inline constexpr std::uint64_t kMaxPayload = 64ull << 20;

enum class MsgType : std::uint8_t {
  kInferReq = 0x01,
  kInferResp = 0x02,
  kModelReq = 0x03,
  kModelResp = 0x04,
  kError = 0x05,
};

struct WireMessage {
  MsgType type = MsgType::kError;
  std::vector<std::uint8_t> payload;

  bool operator==(const WireMessage&) const = default;
};

enum class DecodeStatus {
  kOk,
  kNeedMoreData,
  kBadMagic,
  kBadVersion,
  kBadType,
  kOversize,
};

const char* decode_status_name(DecodeStatus s);

// Frame -> bytes. Throws ResourceError beyond the payload cap.
std::vector<std::uint8_t> encode_message(const WireMessage& m);

// Non-throwing single-frame decode; on kOk, `consumed` (when non-null)
// receives the frame's full length. Never reads past bytes.size().
DecodeStatus try_decode_message(std::span<const std::uint8_t> bytes,
                                WireMessage& out,
                                std::size_t* consumed = nullptr);

// Throwing wrapper for one complete frame occupying the whole span:
// ProtocolError (magic/version/type), FramingError (short or trailing
// bytes), ResourceError (oversize).
WireMessage decode_message(std::span<const std::uint8_t> bytes);

// Incremental parser for chunked reads: feed arbitrary slices, extract
// complete frames as they become available. A malformed prefix poisons the
// stream (length-prefixed framing cannot resynchronize), and every later
// try_extract reports the same status.
class FrameParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // kOk fills `out`; kNeedMoreData means feed more bytes; anything else is
  // the sticky stream-corruption status.
  DecodeStatus try_extract(WireMessage& out);

  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  DecodeStatus poisoned_ = DecodeStatus::kOk;
};

// Typed payloads. Encoders produce the payload bytes for a WireMessage of
// the matching type; try_* decoders reject any length mismatch.
struct InferReq {
  std::vector<float> frame;
  bool operator==(const InferReq&) const = default;
};
struct InferResp {
  std::uint32_t label = 0;
  std::uint32_t partition = 0;
  std::vector<float> probs;
  bool operator==(const InferResp&) const = default;
};
struct ModelReq {
  std::uint32_t k = 0;
  bool operator==(const ModelReq&) const = default;
};
struct ErrorMsg {
  std::uint32_t code = 0;
  std::string text;
  bool operator==(const ErrorMsg&) const = default;
};

// Error codes carried by ErrorMsg.
inline constexpr std::uint32_t kErrUnknownPartition = 1;
inline constexpr std::uint32_t kErrMalformed = 2;
inline constexpr std::uint32_t kErrInternal = 3;

std::vector<std::uint8_t> encode_infer_req(const InferReq& r);
std::vector<std::uint8_t> encode_infer_resp(const InferResp& r);
std::vector<std::uint8_t> encode_model_req(const ModelReq& r);
std::vector<std::uint8_t> encode_error(const ErrorMsg& e);

bool try_decode_infer_req(std::span<const std::uint8_t> payload, InferReq& out);
bool try_decode_infer_resp(std::span<const std::uint8_t> payload,
                           InferResp& out);
bool try_decode_model_req(std::span<const std::uint8_t> payload, ModelReq& out);
bool try_decode_error(std::span<const std::uint8_t> payload, ErrorMsg& out);

// CRC-32 (IEEE 802.3 reflected polynomial); crc32("123456789") == 0xCBF43926.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace cachenet
