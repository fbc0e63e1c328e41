// SPDX-License-Identifier: Apache-2.0
#include "cachenet/cache.hpp"

#include <algorithm>
#include <deque>

#include "cachenet/errors.hpp"
#include "cachenet/rng.hpp"

namespace cachenet {

const char* decision_name(Decision d) {
  return d == Decision::kHitLocal ? "HIT_LOCAL" : "MISS_REMOTE";
}

Decision decide(double entropy, double threshold) {
  return entropy < threshold ? Decision::kHitLocal : Decision::kMissRemote;
}

CacheState::CacheState(std::size_t capacity_, double threshold_)
    : capacity(capacity_), threshold(threshold_) {
  if (capacity == 0) throw ConfigError("cache capacity must be at least 1");
}

bool CacheState::contains(std::size_t index) const {
  return std::find(entries.begin(), entries.end(), index) != entries.end();
}

void CacheState::touch(std::size_t index) {
  auto it = std::find(entries.begin(), entries.end(), index);
  if (it == entries.end()) throw ContractError("touch: index not cached");
  entries.erase(it);
  entries.push_back(index);
  active = index;
}

std::optional<std::size_t> CacheState::replace_lru(std::size_t index) {
  if (contains(index)) throw ContractError("replace_lru: index already cached");
  std::optional<std::size_t> evicted;
  if (entries.size() == capacity) {
    evicted = entries.front();
    entries.erase(entries.begin());
  }
  entries.push_back(index);
  active = index;
  return evicted;
}

std::vector<TraceRecord> run_trace_entropy(std::size_t num_frames,
                                           const std::vector<int>& labels,
                                           CacheState& state,
                                           const LocalFn& local,
                                           const EdgeFn& edge) {
  if (labels.size() != num_frames)
    throw ContractError("run_trace_entropy: label count mismatch");
  std::vector<TraceRecord> trace;
  trace.reserve(num_frames);
  for (std::size_t f = 0; f < num_frames; ++f) {
    TraceRecord rec;
    rec.frame_id = f;
    rec.label = labels[f];

    LocalOutcome lo;
    if (state.active == CacheState::kNone) {
      // No usable model yet: treat as infinitely uncertain.
      lo.entropy = std::numeric_limits<double>::infinity();
    } else {
      lo = local(f, state.active);
    }
    rec.entropy = lo.entropy;
    rec.decision = decide(lo.entropy, state.threshold);

    if (rec.decision == Decision::kHitLocal) {
      rec.active = state.active;
      rec.predicted = lo.predicted;
    } else {
      const EdgeOutcome eo = edge(f);
      rec.active = eo.selected;
      rec.predicted = eo.predicted;
      if (!eo.model_delivered) {
        rec.degraded = true;  // edge answered, but the cache stays as-is
      } else if (state.contains(eo.selected)) {
        state.touch(eo.selected);
      } else {
        rec.evicted = state.replace_lru(eo.selected);
      }
    }
    trace.push_back(rec);
  }
  return trace;
}

std::size_t run_trace_index(const std::vector<std::size_t>& requests,
                            std::size_t capacity) {
  CacheState state(capacity, 0.0);
  std::size_t misses = 0;
  for (std::size_t r : requests) {
    if (state.contains(r)) {
      state.touch(r);
    } else {
      ++misses;
      state.replace_lru(r);
    }
  }
  return misses;
}

std::size_t run_trace_fifo(const std::vector<std::size_t>& requests,
                           std::size_t capacity) {
  if (capacity == 0) throw ConfigError("cache capacity must be at least 1");
  std::deque<std::size_t> q;  // oldest first; hits do not reorder
  std::size_t misses = 0;
  for (std::size_t r : requests) {
    if (std::find(q.begin(), q.end(), r) != q.end()) continue;
    ++misses;
    if (q.size() == capacity) q.pop_front();
    q.push_back(r);
  }
  return misses;
}

BeladyReport monotonicity_violations(const std::vector<std::size_t>& requests,
                                     std::size_t max_capacity, Policy policy) {
  BeladyReport rep;
  std::size_t prev = 0;
  for (std::size_t k = 1; k <= max_capacity; ++k) {
    const std::size_t m = policy == Policy::kLru ? run_trace_index(requests, k)
                                                 : run_trace_fifo(requests, k);
    if (k > 1) {
      ++rep.pairs;
      if (prev < m) ++rep.violations;
    }
    prev = m;
  }
  return rep;
}

BeladyReport belady_check(std::size_t num_traces, std::size_t num_indices,
                          std::size_t max_capacity, std::uint64_t seed,
                          Policy policy, std::size_t trace_len,
                          double stay_prob) {
  if (num_indices == 0) throw ConfigError("belady_check: need indices");
  BeladyReport rep;
  for (std::size_t t = 0; t < num_traces; ++t) {
    CounterRng rng(seed, /*stream=*/t + 1);
    std::vector<std::size_t> req(trace_len);
    std::size_t cur = rng.next_below(num_indices);
    for (std::size_t i = 0; i < trace_len; ++i) {
      if (num_indices > 1 && rng.next_uniform() >= stay_prob) {
        // Switch to a different index, uniformly among the others.
        std::size_t hop = 1 + rng.next_below(num_indices - 1);
        cur = (cur + hop) % num_indices;
      }
      req[i] = cur;
    }
    const BeladyReport one = monotonicity_violations(req, max_capacity, policy);
    rep.pairs += one.pairs;
    rep.violations += one.violations;
  }
  return rep;
}

}  // namespace cachenet
