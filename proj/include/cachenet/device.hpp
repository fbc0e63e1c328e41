// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "cachenet/cache.hpp"
#include "cachenet/train.hpp"
#include "cachenet/transport.hpp"

namespace cachenet {

// Device-side inference loop over a connection: the active cached submodel
// predicts each frame locally; on a miss the edge answers INFER_REQ, its
// label is adopted, and the selected submodel is fetched with MODEL_REQ
// when not already cached. Failed round trips are retried with bounded
// backoff; a frame whose round trip ultimately fails keeps the local
// prediction and is marked degraded, and the loop continues. `state` must
// start empty: fetched submodels live only for the duration of the call.
std::vector<TraceRecord> device_loop(const Dataset& stream, CacheState& state,
                                     Connection& conn,
                                     const RetryPolicy& retry = {});

}  // namespace cachenet
