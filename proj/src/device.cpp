// SPDX-License-Identifier: Apache-2.0
#include "cachenet/device.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <thread>
#include <vector>

#include "cachenet/errors.hpp"
#include "cachenet/model_io.hpp"
#include "cachenet/submodels.hpp"

namespace cachenet {

namespace {

// One request/response exchange. Re-dials between attempts; any failure
// along the way (send, recv, or an ERROR reply) burns one attempt.
bool round_trip(Connection& conn, const WireMessage& req, MsgType want,
                WireMessage& resp, const RetryPolicy& retry) {
  auto backoff = retry.initial_backoff;
  for (std::size_t attempt = 0; attempt < retry.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
      if (!conn.reconnect()) continue;
    }
    if (conn.send(req) && conn.recv(resp) && resp.type == want) return true;
  }
  return false;
}

std::vector<float> frame_row(const Tensor& x, std::size_t f) {
  const std::size_t d = x.cols();
  return {x.data.begin() + static_cast<std::ptrdiff_t>(f * d),
          x.data.begin() + static_cast<std::ptrdiff_t>((f + 1) * d)};
}

}  // namespace

std::vector<TraceRecord> device_loop(const Dataset& stream, CacheState& state,
                                     Connection& conn,
                                     const RetryPolicy& retry) {
  if (stream.x.ndim() != 2) throw ContractError("device_loop: stream must be 2-D");
  // The submodel store below lives only for this call, so the cache must
  // not claim entries fetched by an earlier loop.
  if (state.active != CacheState::kNone || !state.entries.empty())
    throw ContractError("device_loop: cache state must start empty");
  const std::size_t frames = stream.x.rows();
  const std::size_t d = stream.x.cols();

  // Fetched submodels, keyed by partition. Cache membership is tracked by
  // `state`; an entry outliving its eviction here is never read, and a
  // re-selected partition is simply fetched again.
  std::map<std::size_t, Submodel> store;

  // Local answer for the frame currently in flight, consumed by the edge
  // callback when the round trip fails outright.
  int local_pred = -1;
  std::size_t local_frame = static_cast<std::size_t>(-1);

  const LocalFn local = [&](std::size_t f, std::size_t active) {
    Tensor x({1, d}, frame_row(stream.x, f));
    const Tensor probs = submodel_probs(store.at(active).view(), x);
    LocalOutcome lo;
    lo.entropy = predictive_entropy(probs.data);
    lo.predicted = argmax_class(probs.data);
    local_pred = lo.predicted;
    local_frame = f;
    return lo;
  };

  const EdgeFn edge = [&](std::size_t f) {
    EdgeOutcome eo;
    WireMessage resp;
    const WireMessage req{MsgType::kInferReq,
                          encode_infer_req({frame_row(stream.x, f)})};
    InferResp answer;
    if (!round_trip(conn, req, MsgType::kInferResp, resp, retry) ||
        !try_decode_infer_resp(resp.payload, answer)) {
      // Edge unreachable: keep the current model and the local answer.
      eo.selected = state.active;
      eo.predicted = local_frame == f ? local_pred : -1;
      eo.model_delivered = false;
      return eo;
    }
    eo.selected = answer.partition;
    eo.predicted = static_cast<int>(answer.label);
    eo.model_delivered = true;
    if (!state.contains(eo.selected)) {
      const WireMessage mreq{
          MsgType::kModelReq,
          encode_model_req({static_cast<std::uint32_t>(eo.selected)})};
      WireMessage mresp;
      if (round_trip(conn, mreq, MsgType::kModelResp, mresp, retry)) {
        try {
          store.insert_or_assign(eo.selected, deserialize_submodel(mresp.payload));
        } catch (const std::exception&) {
          eo.model_delivered = false;  // corrupt blob: do not cache it
        }
      } else {
        eo.model_delivered = false;
      }
    }
    return eo;
  };

  return run_trace_entropy(frames, stream.y, state, local, edge);
}

}  // namespace cachenet
