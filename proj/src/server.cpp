// SPDX-License-Identifier: Apache-2.0
#include "cachenet/server.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "cachenet/errors.hpp"
#include "cachenet/partition.hpp"
#include "cachenet/submodels.hpp"

namespace cachenet {

namespace {

WireMessage error_reply(std::uint32_t code, std::string text) {
  return {MsgType::kError, encode_error({code, std::move(text)})};
}

}  // namespace

EdgeServer::EdgeServer(Bundle bundle) : bundle_(std::move(bundle)) {
  zeta_ = midpoints(bundle_.pcfg.k);
  sigma_ = bundle_.pcfg.sigma();
  blobs_.reserve(bundle_.submodels.size());
  for (const Submodel& m : bundle_.submodels) blobs_.push_back(serialize_submodel(m));
}

InferResp EdgeServer::infer(std::span<const float> frame) const {
  if (frame.size() != bundle_.vae_cfg.input_dim)
    throw ContractError("infer: frame width does not match the encoder");
  Tensor x({1, frame.size()}, std::vector<float>(frame.begin(), frame.end()));
  if (!x.finite()) throw DomainError("infer: non-finite frame");

  const Tensor zbar = bundle_.vae.encode2_mean(bundle_.vae.encode_mean(x));
  const double theta = angle_of(zbar.at(0, 0), zbar.at(0, 1));
  const std::size_t k = select_submodel(soft_code(theta, zeta_, sigma_));
  const Tensor probs = submodel_probs(bundle_.submodels[k].view(), x);

  InferResp resp;
  resp.partition = static_cast<std::uint32_t>(k);
  resp.probs.assign(probs.data.begin(), probs.data.end());
  resp.label = static_cast<std::uint32_t>(argmax_class(resp.probs));
  return resp;
}

WireMessage EdgeServer::handle(const WireMessage& request) const {
  try {
    switch (request.type) {
      case MsgType::kInferReq: {
        InferReq req;
        if (!try_decode_infer_req(request.payload, req) ||
            req.frame.size() != bundle_.vae_cfg.input_dim)
          return error_reply(kErrMalformed, "bad INFER_REQ frame");
        for (float v : req.frame)
          if (!std::isfinite(v))
            return error_reply(kErrMalformed, "non-finite frame values");
        return {MsgType::kInferResp, encode_infer_resp(infer(req.frame))};
      }
      case MsgType::kModelReq: {
        ModelReq req;
        if (!try_decode_model_req(request.payload, req))
          return error_reply(kErrMalformed, "bad MODEL_REQ payload");
        if (req.k >= blobs_.size())
          return error_reply(kErrUnknownPartition,
                             "no such partition: " + std::to_string(req.k));
        return {MsgType::kModelResp, blobs_[req.k]};
      }
      default:
        return error_reply(kErrMalformed, "unexpected message type");
    }
  } catch (const std::exception& e) {
    return error_reply(kErrInternal, e.what());
  }
}

}  // namespace cachenet
