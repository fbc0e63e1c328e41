// SPDX-License-Identifier: Apache-2.0
#include "cachenet/harness.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <span>
#include <sstream>

#include "cachenet/errors.hpp"
#include "cachenet/submodels.hpp"

namespace cachenet {

namespace {

std::vector<float> frame_row(const Tensor& x, std::size_t f) {
  const std::size_t d = x.cols();
  return {x.data.begin() + static_cast<std::ptrdiff_t>(f * d),
          x.data.begin() + static_cast<std::ptrdiff_t>((f + 1) * d)};
}

// Shortest exact decimal form; doubles round-trip bit-exactly.
std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<TraceRecord> simulate_device(const EdgeServer& server,
                                         const Dataset& stream,
                                         CacheState& state) {
  if (stream.x.ndim() != 2)
    throw ContractError("simulate_device: stream must be 2-D");
  const std::size_t d = stream.x.cols();
  const auto& submodels = server.bundle().submodels;

  const LocalFn local = [&](std::size_t f, std::size_t active) {
    Tensor x({1, d}, frame_row(stream.x, f));
    const Tensor probs = submodel_probs(submodels[active].view(), x);
    LocalOutcome lo;
    lo.entropy = predictive_entropy(probs.data);
    lo.predicted = argmax_class(probs.data);
    return lo;
  };
  const EdgeFn edge = [&](std::size_t f) {
    const std::vector<float> row = frame_row(stream.x, f);
    const InferResp r = server.infer(row);
    EdgeOutcome eo;
    eo.selected = r.partition;
    eo.predicted = static_cast<int>(r.label);
    eo.model_delivered = true;
    return eo;
  };
  return run_trace_entropy(stream.x.rows(), stream.y, state, local, edge);
}

ExperimentReport run_experiment(const EdgeServer& server, const Dataset& stream,
                                const std::vector<double>& thresholds,
                                std::size_t capacity) {
  if (thresholds.empty())
    throw ContractError("run_experiment: need at least one threshold");
  const std::size_t frames = stream.x.rows();
  const std::size_t num_partitions = server.bundle().submodels.size();

  ExperimentReport report;
  report.frames = frames;
  report.cells.reserve(thresholds.size());
  for (double t : thresholds) {
    ThresholdCell cell;
    cell.threshold = t;
    CacheState state(capacity, t);
    cell.trace = simulate_device(server, stream, state);
    cell.histogram.assign(num_partitions,
                          std::vector<std::size_t>(stream.num_classes, 0));
    std::size_t correct = 0;
    for (const TraceRecord& rec : cell.trace) {
      if (rec.decision == Decision::kHitLocal) ++cell.hits;
      if (rec.degraded) ++cell.degraded;
      if (rec.predicted == rec.label) ++correct;
      if (rec.decision == Decision::kMissRemote && !rec.degraded)
        ++cell.histogram.at(rec.active).at(static_cast<std::size_t>(rec.label));
    }
    cell.hit_rate = static_cast<double>(cell.hits) / static_cast<double>(frames);
    cell.accuracy = static_cast<double>(correct) / static_cast<double>(frames);
    cell.local_frac = static_cast<double>(cell.hits + cell.degraded) /
                      static_cast<double>(frames);
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::vector<std::vector<std::size_t>> partition_histogram(
    const EdgeServer& server, const Dataset& data) {
  std::vector<std::vector<std::size_t>> hist(
      server.bundle().submodels.size(),
      std::vector<std::size_t>(data.num_classes, 0));
  for (std::size_t i = 0; i < data.x.rows(); ++i) {
    const InferResp r = server.infer(frame_row(data.x, i));
    ++hist.at(r.partition).at(static_cast<std::size_t>(data.y[i]));
  }
  return hist;
}

double conditional_label_entropy(
    const std::vector<std::vector<std::size_t>>& hist) {
  double total = 0.0;
  for (const auto& row : hist)
    for (std::size_t c : row) total += static_cast<double>(c);
  if (total == 0.0)
    throw DomainError("conditional_label_entropy: empty histogram");
  double h = 0.0;
  for (const auto& row : hist) {
    double n_k = 0.0;
    for (std::size_t c : row) n_k += static_cast<double>(c);
    if (n_k == 0.0) continue;
    double h_k = 0.0;
    for (std::size_t c : row) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / n_k;
      h_k -= p * std::log(p);
    }
    h += (n_k / total) * h_k;
  }
  return h;
}

double submodel_accuracy(const Submodel& m, const Dataset& data) {
  const std::size_t n = data.x.rows();
  if (n == 0) throw ContractError("submodel_accuracy: empty dataset");
  const Tensor probs = submodel_probs(m.view(), data.x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const float> row(probs.data.data() + i * probs.cols(),
                                     probs.cols());
    if (argmax_class(row) == data.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::string losses_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,J,JF,LVAE,LVAE2\n";
  for (const EpochLog& e : log) {
    out += std::to_string(e.epoch);
    out += ',';
    out += fmt_g(e.j);
    out += ',';
    out += fmt_g(e.jf);
    out += ',';
    out += fmt_g(e.lvae);
    out += ',';
    out += fmt_g(e.lvae2);
    out += '\n';
  }
  return out;
}

std::string trace_csv(const std::vector<TraceRecord>& trace) {
  std::string out = "frame_id,decision,entropy,active,evicted,label,pred\n";
  for (const TraceRecord& rec : trace) {
    out += std::to_string(rec.frame_id);
    out += ',';
    out += decision_name(rec.decision);
    if (rec.degraded) out += "_DEGRADED";  // miss answered on-device
    out += ',';
    out += fmt_g(rec.entropy);
    out += ',';
    out += rec.active == CacheState::kNone ? "-" : std::to_string(rec.active);
    out += ',';
    out += rec.evicted ? std::to_string(*rec.evicted) : "-";
    out += ',';
    out += std::to_string(rec.label);
    out += ',';
    out += std::to_string(rec.predicted);
    out += '\n';
  }
  return out;
}

std::string report_csv(const ExperimentReport& report) {
  std::string out = "threshold,hit_rate,accuracy,local_frac\n";
  for (const ThresholdCell& cell : report.cells) {
    out += fmt_g(cell.threshold);
    out += ',';
    out += fmt_g(cell.hit_rate);
    out += ',';
    out += fmt_g(cell.accuracy);
    out += ',';
    out += fmt_g(cell.local_frac);
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "frame_id,decision,entropy,active,evicted,label,pred")
    throw ConfigError("trace csv: bad header");

  std::vector<TraceRecord> trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 7)
      throw ConfigError("trace csv: line " + std::to_string(lineno) +
                        ": expected 7 fields");
    TraceRecord rec;
    rec.frame_id = std::strtoull(fields[0].c_str(), nullptr, 10);
    if (fields[1] == "HIT_LOCAL") {
      rec.decision = Decision::kHitLocal;
    } else if (fields[1] == "MISS_REMOTE") {
      rec.decision = Decision::kMissRemote;
    } else if (fields[1] == "MISS_REMOTE_DEGRADED") {
      rec.decision = Decision::kMissRemote;
      rec.degraded = true;
    } else {
      throw ConfigError("trace csv: line " + std::to_string(lineno) +
                        ": unknown decision " + fields[1]);
    }
    rec.entropy = std::strtod(fields[2].c_str(), nullptr);
    rec.active = fields[3] == "-"
                     ? CacheState::kNone
                     : std::strtoull(fields[3].c_str(), nullptr, 10);
    if (fields[4] != "-")
      rec.evicted = std::strtoull(fields[4].c_str(), nullptr, 10);
    rec.label = std::atoi(fields[5].c_str());
    rec.predicted = std::atoi(fields[6].c_str());
    trace.push_back(rec);
  }
  return trace;
}

}  // namespace cachenet
