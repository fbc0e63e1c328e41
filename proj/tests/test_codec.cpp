// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "cachenet/codec.hpp"
#include "cachenet/errors.hpp"
#include "cachenet/model_io.hpp"
#include "cachenet/rng.hpp"
#include "cachenet/stacked_vae.hpp"
#include "cachenet/submodels.hpp"
#include "doctest.h"

using namespace cachenet;

namespace {

WireMessage random_message(CounterRng& rng) {
  WireMessage m;
  m.type = static_cast<MsgType>(1 + rng.next_below(5));
  m.payload.resize(rng.next_below(200));
  for (std::uint8_t& b : m.payload)
    b = static_cast<std::uint8_t>(rng.next_below(256));
  return m;
}

}  // namespace

TEST_CASE("model request frame matches the golden bytes") {
  const std::vector<std::uint8_t> golden{0x43, 0x4E, 0x45, 0x54, 0x01, 0x03,
                                         0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                         0x00, 0x04, 0x00, 0x00, 0x00, 0x02};
  WireMessage m{MsgType::kModelReq, encode_model_req({2})};
  CHECK(encode_message(m) == golden);

  WireMessage back = decode_message(golden);
  CHECK(back == m);
  ModelReq req;
  REQUIRE(try_decode_model_req(back.payload, req));
  CHECK(req.k == 2);
}

TEST_CASE("empty-payload error frame is exactly the header") {
  WireMessage m{MsgType::kError, {}};
  const std::vector<std::uint8_t> bytes = encode_message(m);
  CHECK(bytes.size() == 14);
  CHECK(decode_message(bytes) == m);
}

TEST_CASE("100k random frames round-trip bit-exactly") {
  CounterRng rng(2026, 0);
  for (int i = 0; i < 100000; ++i) {
    WireMessage m = random_message(rng);
    CHECK(decode_message(encode_message(m)) == m);
  }
}

TEST_CASE("malformed frames are rejected without panic") {
  WireMessage out;

  SUBCASE("wrong magic") {
    std::vector<std::uint8_t> b = encode_message({MsgType::kError, {1, 2}});
    b[0] ^= 0x01;
    CHECK(try_decode_message(b, out) == DecodeStatus::kBadMagic);
    CHECK_THROWS_AS(decode_message(b), ProtocolError);
  }
  SUBCASE("wrong version") {
    std::vector<std::uint8_t> b = encode_message({MsgType::kError, {}});
    b[4] = 0x02;
    CHECK(try_decode_message(b, out) == DecodeStatus::kBadVersion);
    CHECK_THROWS_AS(decode_message(b), ProtocolError);
  }
  SUBCASE("unknown type") {
    std::vector<std::uint8_t> b = encode_message({MsgType::kError, {}});
    b[5] = 0x06;
    CHECK(try_decode_message(b, out) == DecodeStatus::kBadType);
    b[5] = 0x00;
    CHECK(try_decode_message(b, out) == DecodeStatus::kBadType);
  }
  SUBCASE("declared length beyond the cap") {
    std::vector<std::uint8_t> b = encode_message({MsgType::kError, {}});
    b[6] = 0xFF;  // payload_len highest byte
    CHECK(try_decode_message(b, out) == DecodeStatus::kOversize);
    CHECK_THROWS_AS(decode_message(b), ResourceError);
  }
  SUBCASE("truncations ask for more data") {
    const std::vector<std::uint8_t> b =
        encode_message({MsgType::kInferReq, {9, 9, 9, 9}});
    for (std::size_t cut = 0; cut < b.size(); ++cut) {
      const auto prefix = std::span<const std::uint8_t>(b).first(cut);
      CHECK(try_decode_message(prefix, out) == DecodeStatus::kNeedMoreData);
    }
    CHECK_THROWS_AS(decode_message(std::span<const std::uint8_t>(b).first(9)),
                    FramingError);
  }
  SUBCASE("trailing garbage after a full frame") {
    std::vector<std::uint8_t> b = encode_message({MsgType::kError, {}});
    b.push_back(0x00);
    CHECK_THROWS_AS(decode_message(b), FramingError);
  }
  SUBCASE("oversize payload refuses to encode") {
    WireMessage big{MsgType::kModelResp,
                    std::vector<std::uint8_t>(kMaxPayload + 1)};
    CHECK_THROWS_AS(encode_message(big), ResourceError);
  }
  SUBCASE("random byte soup never crashes the decoder") {
    CounterRng rng(77, 0);
    for (int i = 0; i < 20000; ++i) {
      std::vector<std::uint8_t> junk(rng.next_below(64));
      for (std::uint8_t& b : junk)
        b = static_cast<std::uint8_t>(rng.next_below(256));
      (void)try_decode_message(junk, out);
    }
  }
}

TEST_CASE("frame parser reassembles streams under any chunking") {
  CounterRng rng(31337, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WireMessage> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 40; ++i) {
      sent.push_back(random_message(rng));
      const std::vector<std::uint8_t> b = encode_message(sent.back());
      stream.insert(stream.end(), b.begin(), b.end());
    }

    FrameParser parser;
    std::vector<WireMessage> got;
    std::size_t pos = 0;
    while (pos < stream.size() || true) {
      WireMessage m;
      DecodeStatus s = parser.try_extract(m);
      if (s == DecodeStatus::kOk) {
        got.push_back(std::move(m));
        continue;
      }
      REQUIRE(s == DecodeStatus::kNeedMoreData);
      if (pos == stream.size()) break;
      const std::size_t chunk =
          std::min<std::size_t>(1 + rng.next_below(17), stream.size() - pos);
      parser.feed(std::span<const std::uint8_t>(stream).subspan(pos, chunk));
      pos += chunk;
    }
    CHECK(got == sent);
    CHECK(parser.buffered() == 0);
  }
}

TEST_CASE("frame parser poisons on stream corruption") {
  FrameParser parser;
  std::vector<std::uint8_t> b = encode_message({MsgType::kError, {}});
  b[0] = 0x00;
  parser.feed(b);
  WireMessage m;
  CHECK(parser.try_extract(m) == DecodeStatus::kBadMagic);
  // Feeding good bytes afterwards cannot resynchronize a length stream.
  parser.feed(encode_message({MsgType::kError, {}}));
  CHECK(parser.try_extract(m) == DecodeStatus::kBadMagic);
}

TEST_CASE("typed payloads round-trip and reject length mismatches") {
  InferReq req{{1.5f, -2.25f, 0.0f}};
  InferReq req2;
  REQUIRE(try_decode_infer_req(encode_infer_req(req), req2));
  CHECK(req == req2);

  InferResp resp{3, 1, {0.1f, 0.2f, 0.7f}};
  InferResp resp2;
  REQUIRE(try_decode_infer_resp(encode_infer_resp(resp), resp2));
  CHECK(resp == resp2);

  ErrorMsg err{kErrUnknownPartition, "no such branch"};
  ErrorMsg err2;
  REQUIRE(try_decode_error(encode_error(err), err2));
  CHECK(err == err2);

  std::vector<std::uint8_t> bytes = encode_infer_req(req);
  bytes.push_back(0);
  CHECK_FALSE(try_decode_infer_req(bytes, req2));
  bytes.pop_back();
  bytes.pop_back();
  CHECK_FALSE(try_decode_infer_req(bytes, req2));
  ModelReq mreq;
  CHECK_FALSE(try_decode_model_req({}, mreq));
  CHECK_FALSE(try_decode_error(std::vector<std::uint8_t>{1, 2}, err2));

  // Float payloads preserve bit patterns, including negative zero.
  InferReq zero{{-0.0f}};
  InferReq zero2;
  REQUIRE(try_decode_infer_req(encode_infer_req(zero), zero2));
  CHECK(std::signbit(zero2.frame[0]));
}

TEST_CASE("crc32 matches the standard check value") {
  const std::string check = "123456789";
  CHECK(crc32(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(check.data()),
            check.size())) == 0xCBF43926u);
  CHECK(crc32({}) == 0x00000000u);
}

TEST_CASE("model blob layout matches the golden single-tensor case") {
  Tensor t({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  const std::vector<std::uint8_t> blob = serialize_model({&t});
  // magic+version+count + rank+dims+data + crc
  REQUIRE(blob.size() == 7 + 1 + 8 + 16 + 4);
  CHECK(blob[0] == 0x43);  // C
  CHECK(blob[1] == 0x4E);  // N
  CHECK(blob[2] == 0x4D);  // M
  CHECK(blob[3] == 0x44);  // D
  CHECK(blob[4] == 0x01);
  CHECK(blob[5] == 0x00);
  CHECK(blob[6] == 0x01);  // one tensor
  CHECK(blob[7] == 0x02);  // rank 2
  CHECK(blob[11] == 0x02);  // dim0 low byte (big-endian)
  CHECK(blob[15] == 0x02);  // dim1 low byte
  // 1.0f little-endian = 00 00 80 3F
  CHECK(blob[16] == 0x00);
  CHECK(blob[17] == 0x00);
  CHECK(blob[18] == 0x80);
  CHECK(blob[19] == 0x3F);

  const std::vector<Tensor> back = deserialize_model(blob);
  REQUIRE(back.size() == 1);
  CHECK(back[0].dims == t.dims);
  CHECK(back[0].data == t.data);
}

TEST_CASE("zero-tensor blob is valid") {
  const std::vector<std::uint8_t> blob = serialize_model({});
  CHECK(blob.size() == 11);
  CHECK(deserialize_model(blob).empty());
}

TEST_CASE("every single-bit corruption of a blob is caught") {
  Tensor a({3}, {0.5f, -1.25f, 3.75f});
  Tensor b({2, 3}, {1, 2, 3, 4, 5, 6});
  const std::vector<std::uint8_t> blob = serialize_model({&a, &b});
  REQUIRE_NOTHROW(deserialize_model(blob));

  for (std::size_t byte = 0; byte < blob.size(); ++byte)
    for (int bit = 0; bit < 8; ++bit) {
      std::vector<std::uint8_t> bad = blob;
      bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
      CHECK_THROWS_AS(deserialize_model(bad), std::runtime_error);
      if (byte >= 5) {
        // Beyond magic/version everything is under the checksum.
        CHECK_THROWS_AS(deserialize_model(bad), IntegrityError);
      }
    }
}

TEST_CASE("structurally broken blobs raise format errors") {
  CHECK_THROWS_AS(deserialize_model(std::vector<std::uint8_t>{1, 2, 3}),
                  FormatError);

  // Hand-build a CRC-valid blob with an oversize dim product.
  std::vector<std::uint8_t> bad{0x43, 0x4E, 0x4D, 0x44, 0x01, 0x00, 0x01,
                                0x02, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF,
                                0xFF, 0xFF};
  const std::uint32_t crc = crc32(bad);
  for (int shift = 24; shift >= 0; shift -= 8)
    bad.push_back(static_cast<std::uint8_t>(crc >> shift));
  CHECK_THROWS_AS(deserialize_model(bad), FormatError);

  Tensor inf_tensor({1}, {std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(serialize_model({&inf_tensor}), DomainError);
}

TEST_CASE("submodels and encoders survive round trips bit-exactly") {
  Generator gen = Generator::init({5, 7, 3}, 4, 99);
  CounterRng rng(100, 0);
  for (Tensor* p : gen.params())
    for (float& v : p->data) v = rng.next_normal();

  for (std::size_t k = 0; k < 4; ++k) {
    Submodel m = gen.materialize(k);
    Submodel back = deserialize_submodel(serialize_submodel(m));
    CHECK(back.trunk_w1.data == m.trunk_w1.data);
    CHECK(back.trunk_b2.data == m.trunk_b2.data);
    CHECK(back.head_w.data == m.head_w.data);
    CHECK(back.head_b.dims == m.head_b.dims);
  }

  StackedVaeConfig vcfg;
  vcfg.input_dim = 6;
  vcfg.z_dim = 5;
  vcfg.hidden_dim = 9;
  StackedVae vae = StackedVae::init(vcfg, 4);
  StackedVae back = deserialize_encoder(serialize_encoder(vae), vcfg);
  const auto orig_params = vae.stage1_params();
  const auto back_params = back.stage1_params();
  for (std::size_t i = 0; i < orig_params.size(); ++i)
    CHECK(orig_params[i]->data == back_params[i]->data);

  StackedVaeConfig wrong = vcfg;
  wrong.z_dim = 4;
  CHECK_THROWS_AS(deserialize_encoder(serialize_encoder(vae), wrong),
                  FormatError);
}

TEST_CASE("bundles round-trip through a directory") {
  const std::string dir = "/tmp/cachenet_test_bundle";
  std::filesystem::remove_all(dir);

  StackedVaeConfig vcfg;
  vcfg.input_dim = 8;
  vcfg.z_dim = 6;
  vcfg.hidden_dim = 10;
  StackedVae vae = StackedVae::init(vcfg, 21);
  Generator gen = Generator::init({8, 12, 5}, 4, 22);
  CounterRng rng(23, 0);
  for (Tensor* p : gen.params())
    for (float& v : p->data) v = 0.1f * rng.next_normal();
  PartitionConfig pcfg;

  save_bundle(dir, vae, gen, pcfg);
  Bundle b = load_bundle(dir);

  CHECK(b.vae_cfg.input_dim == 8);
  CHECK(b.pcfg.k == 4);
  CHECK(b.arch.num_classes == 5);
  CHECK(b.submodels.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    Submodel want = gen.materialize(k);
    CHECK(b.submodels[k].head_w.data == want.head_w.data);
    CHECK(b.submodels[k].trunk_w1.data == want.trunk_w1.data);
  }
  const auto vp = vae.stage2_params();
  const auto bp = b.vae.stage2_params();
  for (std::size_t i = 0; i < vp.size(); ++i)
    CHECK(vp[i]->data == bp[i]->data);

  // No temp files left behind by the atomic writes.
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    CHECK(entry.path().extension() != ".tmp");

  std::filesystem::remove_all(dir);
}
