// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cachenet/cache.hpp"
#include "cachenet/server.hpp"
#include "cachenet/train.hpp"

namespace cachenet {

// In-process reference device: identical trace semantics to the wire-backed
// device loop, with the edge side answered directly by EdgeServer::infer.
std::vector<TraceRecord> simulate_device(const EdgeServer& server,
                                         const Dataset& stream,
                                         CacheState& state);

// Per-threshold outcome of one trace.
struct ThresholdCell {
  double threshold = 0.0;
  std::size_t hits = 0;
  std::size_t degraded = 0;
  double hit_rate = 0.0;    // hits / frames
  double accuracy = 0.0;    // predictions matching ground truth / frames
  double local_frac = 0.0;  // frames answered on-device / frames
  std::vector<TraceRecord> trace;
  // Class counts per partition, tallied from this trace's edge selections:
  // histogram[k][c] = misses of true class c that the edge routed to k.
  std::vector<std::vector<std::size_t>> histogram;
};

struct ExperimentReport {
  std::size_t frames = 0;
  std::vector<ThresholdCell> cells;  // one per threshold, input order
};

// Runs the full trace once per threshold, each cell with its own cache of
// the given capacity, and computes the summary metrics.
ExperimentReport run_experiment(const EdgeServer& server, const Dataset& stream,
                                const std::vector<double>& thresholds,
                                std::size_t capacity = 2);

// Routes every sample through the edge selection and tallies true labels:
// hist[k][c] = samples of class c assigned to partition k.
std::vector<std::vector<std::size_t>> partition_histogram(
    const EdgeServer& server, const Dataset& data);

// Size-weighted mean label entropy over partitions (conditional entropy of
// the label given the partition, in nats). Empty partitions contribute 0.
double conditional_label_entropy(
    const std::vector<std::vector<std::size_t>>& hist);

// Fraction of `data` the given submodel labels correctly.
double submodel_accuracy(const Submodel& m, const Dataset& data);

// CSV renderers; fixed schemas, pure functions of their inputs.
std::string losses_csv(const std::vector<EpochLog>& log);
std::string trace_csv(const std::vector<TraceRecord>& trace);
std::string report_csv(const ExperimentReport& report);

// Inverse of trace_csv; ConfigError on malformed text.
std::vector<TraceRecord> parse_trace_csv(const std::string& text);

}  // namespace cachenet
