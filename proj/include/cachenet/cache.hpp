// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace cachenet {

enum class Decision : std::uint8_t { kHitLocal, kMissRemote };
const char* decision_name(Decision d);

// HIT iff the predictive entropy is strictly below the threshold. An infinite
// threshold therefore always hits on finite entropy; infinite entropy (no
// usable local model yet) always misses.
Decision decide(double entropy, double threshold);

// Submodel cache with least-recently-used replacement. `entries` is ordered
// LRU-first; `active` is the entry whose predictions the device currently
// uses.
struct CacheState {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  CacheState(std::size_t capacity, double threshold);

  std::size_t capacity;
  double threshold;
  std::vector<std::size_t> entries;  // LRU -> MRU
  std::size_t active = kNone;

  bool contains(std::size_t index) const;
  // Moves an existing entry to the MRU position and makes it active.
  void touch(std::size_t index);
  // Inserts a new entry at MRU (evicting the LRU entry when full) and makes
  // it active. Returns the evicted index, if any.
  std::optional<std::size_t> replace_lru(std::size_t index);
};

struct TraceRecord {
  std::size_t frame_id = 0;
  Decision decision = Decision::kMissRemote;
  double entropy = 0.0;
  std::size_t active = CacheState::kNone;  // submodel behind the prediction
  std::optional<std::size_t> evicted;
  int label = -1;
  int predicted = -1;
  bool degraded = false;  // miss whose replacement model never arrived
};

// Local inference result for one frame under a given submodel.
struct LocalOutcome {
  double entropy = 0.0;
  int predicted = -1;
};
// Edge-side answer on a miss: chosen partition, its prediction, and whether
// the submodel itself was delivered for caching.
struct EdgeOutcome {
  std::size_t selected = 0;
  int predicted = -1;
  bool model_delivered = true;
};

using LocalFn = std::function<LocalOutcome(std::size_t frame, std::size_t active)>;
using EdgeFn = std::function<EdgeOutcome(std::size_t frame)>;

// Entropy-mode trace: per frame the active submodel predicts locally; a miss
// consults the edge, whose prediction is used for that frame, and the chosen
// submodel is cached (touch or LRU-replace) when delivered.
std::vector<TraceRecord> run_trace_entropy(std::size_t num_frames,
                                           const std::vector<int>& labels,
                                           CacheState& state, const LocalFn& local,
                                           const EdgeFn& edge);

// Index-mode trace (pure paging semantics): HIT iff the requested index is
// cached. Returns the miss count.
std::size_t run_trace_index(const std::vector<std::size_t>& requests,
                            std::size_t capacity);

// Same accounting under first-in-first-out replacement; kept as the control
// policy that CAN exhibit capacity anomalies.
std::size_t run_trace_fifo(const std::vector<std::size_t>& requests,
                           std::size_t capacity);

enum class Policy : std::uint8_t { kLru, kFifo };

struct BeladyReport {
  std::size_t violations = 0;  // (trace, k) pairs with misses(k) < misses(k+1)
  std::size_t pairs = 0;
};

// Counts adjacent capacities k where one trace misses MORE at k+1 than at k.
BeladyReport monotonicity_violations(const std::vector<std::size_t>& requests,
                                     std::size_t max_capacity, Policy policy);

// Randomized monotonicity audit: misses must not increase with capacity.
// `num_indices` is the request alphabet; `stay_prob` controls locality.
BeladyReport belady_check(std::size_t num_traces, std::size_t num_indices,
                          std::size_t max_capacity, std::uint64_t seed,
                          Policy policy = Policy::kLru,
                          std::size_t trace_len = 200, double stay_prob = 0.6);

}  // namespace cachenet
