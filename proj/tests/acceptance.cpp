// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance audit. Ten independent checks, one [PASS]/[FAIL]
// line each; the process exits nonzero when any check fails. Every bound is
// pinned next to the check that uses it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cachenet/cache.hpp"
#include "cachenet/codec.hpp"
#include "cachenet/device.hpp"
#include "cachenet/errors.hpp"
#include "cachenet/graph.hpp"
#include "cachenet/harness.hpp"
#include "cachenet/model_io.hpp"
#include "cachenet/partition.hpp"
#include "cachenet/rng.hpp"
#include "cachenet/server.hpp"
#include "cachenet/stacked_vae.hpp"
#include "cachenet/stream.hpp"
#include "cachenet/submodels.hpp"
#include "cachenet/train.hpp"
#include "cachenet/transport.hpp"

namespace {

using namespace cachenet;
using Clock = std::chrono::steady_clock;

constexpr double kPi = std::numbers::pi;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

int g_failures = 0;

void verdict(int idx, const char* name, const Outcome& o) {
  std::printf("[%s] %2d %s — %s\n", o.ok ? "PASS" : "FAIL", idx, name,
              o.detail.c_str());
  std::fflush(stdout);
  if (!o.ok) ++g_failures;
}

template <typename Fn>
Outcome guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

// ---------------------------------------------------------------------------
// 1. Finite-difference audit of all four training objectives.

struct FdTotals {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

void fd_accumulate(FdTotals& t, ad::Graph& g, ad::NodeId loss,
                   const std::vector<ad::NodeId>& leaves) {
  for (ad::NodeId leaf : leaves) {
    const ad::FiniteDiffReport rep =
        ad::finite_diff_check_detailed(g, loss, leaf, 1e-3);
    t.max_rel_err = std::max(t.max_rel_err, rep.max_rel_err);
    t.checked += rep.checked;
    t.skipped += rep.skipped;
  }
}

Outcome check_gradients() {
  constexpr double kBound = 1e-4;    // relative error ceiling per partial
  constexpr double kBudget = 60.0;   // seconds for the whole audit
  const auto t0 = Clock::now();

  StackedVaeConfig vcfg;
  vcfg.input_dim = 6;
  vcfg.z_dim = 5;
  vcfg.hidden_dim = 7;
  const SubmodelArch arch{6, 7, 3};
  constexpr std::size_t kBranches = 3;
  constexpr std::size_t kBatch = 6;

  FdTotals t;
  for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
    const StackedVae vae = StackedVae::init(vcfg, seed);
    const Generator gen = Generator::init(arch, kBranches, seed + 1);
    CounterRng rng(seed, 2);
    const Tensor x = Tensor::randn({kBatch, vcfg.input_dim}, rng, 1.0f);
    std::vector<int> labels(kBatch);
    for (int& y : labels)
      y = static_cast<int>(rng.next_below(arch.num_classes));
    std::vector<std::vector<std::size_t>> psets(kBatch);
    for (std::size_t i = 0; i < kBatch; ++i) psets[i] = {i % kBranches};
    const std::vector<Tensor> masks =
        partition_masks(psets, labels, kBranches, arch.num_classes);

    {
      ad::Graph g(seed + 3);
      const VaeLossNodes s1 = build_loss_infovae(g, vae, x);
      fd_accumulate(t, g, s1.loss, s1.params);
    }
    {
      ad::Graph g(seed + 4);
      CounterRng zr(seed, 5);
      const Tensor z = Tensor::randn({kBatch, vcfg.z_dim}, zr, 1.0f);
      const VaeLossNodes s2 = build_loss_stage2(g, vae, z);
      fd_accumulate(t, g, s2.loss, s2.params);
    }
    {
      ad::Graph g(seed + 6);
      const JfNodes jf = build_loss_jf(g, gen, x, masks);
      fd_accumulate(t, g, jf.loss, jf.chi);
    }
    {
      ad::Graph g(seed + 7);
      const TotalNodes tot =
          build_loss_total(g, vae, gen, x, [&](const Tensor&) { return masks; });
      std::vector<ad::NodeId> leaves = tot.s1.params;
      leaves.insert(leaves.end(), tot.s2.params.begin(), tot.s2.params.end());
      leaves.insert(leaves.end(), tot.jf.chi.begin(), tot.jf.chi.end());
      fd_accumulate(t, g, tot.loss, leaves);
    }
  }

  const double elapsed = seconds_since(t0);
  const bool ok = t.max_rel_err < kBound && t.checked > 0 && elapsed < kBudget;
  return {ok, fmt("max_rel_err %.2e over %zu partials (%zu skipped) in %.1fs",
                  t.max_rel_err, t.checked, t.skipped, elapsed)};
}

// ---------------------------------------------------------------------------
// 2. Angular-code goldens at K=4, gamma=0.3, tau=0.3.

Outcome check_code_goldens() {
  constexpr double kSigmaGolden = 0.657975764426209;  // pi*1.3/(4*sqrt(-2 ln .3))
  const double sigma = sigma_from(4, 0.3, 0.3);
  if (std::fabs(sigma - kSigmaGolden) > 1e-12)
    return {false, fmt("sigma %.15f != %.15f", sigma, kSigmaGolden)};
  if (std::fabs(sigma - 0.65798) > 1e-5)
    return {false, fmt("sigma %.6f not within 1e-5 of 0.65798", sigma)};

  const std::vector<double> zeta = midpoints(4);
  const auto members = [&](double theta) {
    const std::vector<double> c = soft_code(theta, zeta, sigma);
    int n = 0;
    for (double v : c) n += v >= 0.3;
    return n;
  };
  if (members(kPi / 3.0) != 1)
    return {false, fmt("theta=pi/3 has %d members, want 1", members(kPi / 3.0))};
  if (members(4.0 * kPi / 9.0) != 2)
    return {false,
            fmt("theta=4pi/9 has %d members, want 2", members(4.0 * kPi / 9.0))};

  // Library soft code vs. an independently written periodic-kernel sum
  // (two wraparound images each side; the extra pair is below 1e-19 here).
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double theta = 2.0 * kPi * i / 10000.0;
    const std::vector<double> c = soft_code(theta, zeta, sigma);
    for (std::size_t k = 0; k < zeta.size(); ++k) {
      double direct = 0.0;
      for (int n = -2; n <= 2; ++n) {
        const double d = theta - zeta[k] + 2.0 * kPi * n;
        direct += std::exp(-d * d * inv);
      }
      worst = std::max(worst, std::fabs(direct - c[k]));
    }
  }
  if (worst > 1e-9)
    return {false, fmt("direct evaluation deviates by %.2e", worst)};
  return {true, fmt("sigma %.5f; memberships 1 and 2; max deviation %.1e over "
                    "10000 angles",
                    sigma, worst)};
}

// ---------------------------------------------------------------------------
// 3. Decay-width identity and the membership radius equivalence.

Outcome check_width_identity() {
  CounterRng rng(20260819, 1);

  // Identity sigma * sqrt(-2 ln tau) == pi (1 + gamma) / K, 100 random draws.
  double worst_rel = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = 2 + rng.next_below(15);
    const double gamma = 0.99 * rng.next_uniform();
    const double tau = 0.01 + 0.98 * rng.next_uniform();
    const double lhs = sigma_from(k, gamma, tau) * std::sqrt(-2.0 * std::log(tau));
    const double rhs = kPi * (1.0 + gamma) / static_cast<double>(k);
    worst_rel = std::max(worst_rel, std::fabs(lhs - rhs) / rhs);
  }
  if (worst_rel > 1e-12)
    return {false, fmt("width identity off by %.2e relative", worst_rel)};

  // Membership (c_k >= tau) <=> circular distance <= half-width, swept at
  // 10^4 angles. Configs are drawn from the regime where the wraparound
  // tail at the boundary sits below the 1e-9 guard band; the guard skips
  // exact boundary coincidences.
  std::size_t configs = 0;
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  for (int draw = 0; draw < 10000 && configs < 20; ++draw) {
    const std::size_t k = 4 + rng.next_below(9);
    const double gamma = 0.5 * rng.next_uniform();
    const double tau = 0.05 + 0.40 * rng.next_uniform();
    const double half = kPi * (1.0 + gamma) / static_cast<double>(k);
    const double tail = std::pow(tau, std::pow(2.0 * kPi / half - 1.0, 2.0));
    if (tail >= 1e-13) continue;
    ++configs;

    const std::vector<double> zeta = midpoints(k);
    const double sigma = sigma_from(k, gamma, tau);
    for (int i = 0; i < 10000; ++i) {
      const double theta = 2.0 * kPi * i / 10000.0;
      const std::vector<double> c = soft_code(theta, zeta, sigma);
      for (std::size_t s = 0; s < k; ++s) {
        if (std::fabs(c[s] - tau) <= 1e-9) continue;  // boundary coincidence
        const bool member = c[s] >= tau;
        const bool inside = circular_distance(theta, zeta[s]) <= half;
        ++checked;
        if (member != inside) ++mismatches;
      }
    }
  }
  if (configs < 20)
    return {false, fmt("only %zu usable configs drawn", configs)};
  if (mismatches != 0)
    return {false, fmt("%zu membership mismatches over %zu checks", mismatches,
                       checked)};
  return {true, fmt("identity within %.1e; 0 mismatches over %zu membership "
                    "checks across %zu configs",
                    worst_rel, checked, configs)};
}

// ---------------------------------------------------------------------------
// 4. LRU monotonicity plus stepwise set inclusion; FIFO control anomaly.

void lru_step(CacheState& st, std::size_t idx) {
  if (st.contains(idx)) {
    st.touch(idx);
  } else {
    st.replace_lru(idx);
  }
}

bool subset_of(const std::vector<std::size_t>& a,
               const std::vector<std::size_t>& b) {
  for (std::size_t v : a)
    if (std::find(b.begin(), b.end(), v) == b.end()) return false;
  return true;
}

Outcome check_lru_monotone() {
  constexpr std::size_t kTraces = 100;
  constexpr std::size_t kLen = 200;
  constexpr std::size_t kAlphabet = 8;

  std::size_t miss_violations = 0;
  std::size_t inclusion_steps = 0;
  std::size_t inclusion_breaks = 0;
  for (std::size_t t = 0; t < kTraces; ++t) {
    CounterRng rng(1000 + t, 4);
    std::vector<std::size_t> trace(kLen);
    std::size_t idx = rng.next_below(kAlphabet);
    for (std::size_t i = 0; i < kLen; ++i) {
      if (rng.next_uniform() >= 0.6) idx = rng.next_below(kAlphabet);
      trace[i] = idx;
    }

    std::size_t prev = run_trace_index(trace, 1);
    for (std::size_t cap = 2; cap <= kAlphabet; ++cap) {
      const std::size_t misses = run_trace_index(trace, cap);
      if (misses > prev) ++miss_violations;
      prev = misses;
    }

    for (std::size_t cap = 1; cap + 1 <= kAlphabet; ++cap) {
      CacheState small(cap, 0.0);
      CacheState big(cap + 1, 0.0);
      for (std::size_t r : trace) {
        lru_step(small, r);
        lru_step(big, r);
        ++inclusion_steps;
        if (!subset_of(small.entries, big.entries)) ++inclusion_breaks;
      }
    }
  }

  const BeladyReport audit = belady_check(100, 8, 8, 4242, Policy::kLru);
  const std::vector<std::size_t> anomaly = {1, 2, 3, 4, 1, 2, 5, 1, 2, 3, 4, 5};
  const BeladyReport fifo = monotonicity_violations(anomaly, 4, Policy::kFifo);

  const bool ok = miss_violations == 0 && inclusion_breaks == 0 &&
                  audit.violations == 0 && fifo.violations >= 1;
  return {ok, fmt("0 of %zu capacity pairs regress; inclusion holds at %zu "
                  "steps; FIFO control trips %zu of %zu",
                  audit.pairs, inclusion_steps, fifo.violations, fifo.pairs)};
}

// ---------------------------------------------------------------------------
// 5. Golden LRU miss counts.

Outcome check_lru_goldens() {
  const std::vector<std::size_t> a = {1, 2, 3, 4, 1, 2, 5, 1, 2, 3, 4, 5};
  const std::vector<std::size_t> b = {1, 2, 3, 1, 2, 4, 1, 2};
  struct Golden {
    const std::vector<std::size_t>* trace;
    std::size_t capacity;
    std::size_t misses;
  };
  const Golden goldens[] = {
      {&a, 3, 10}, {&a, 4, 8}, {&b, 2, 8}, {&b, 3, 4}, {&b, 4, 4},
  };
  for (const Golden& g : goldens) {
    const std::size_t got = run_trace_index(*g.trace, g.capacity);
    if (got != g.misses)
      return {false, fmt("capacity %zu: %zu misses, want %zu", g.capacity, got,
                         g.misses)};
  }
  return {true, "5 golden miss counts match"};
}

// ---------------------------------------------------------------------------
// Shared toy workload for checks 6-10: one seeded training run, a held-out
// sample set, and a temporally local frame stream.

struct ToyWorkload {
  std::vector<EpochLog> log;
  double train_seconds = 0.0;
  std::optional<EdgeServer> server;
  Dataset heldout;
  Dataset stream;
};

ToyWorkload build_toy_workload() {
  StreamConfig scfg;  // 8 classes, 32 dims, 64/class, run length 50, 5000 frames
  StackedVaeConfig vcfg;
  vcfg.input_dim = scfg.input_dim;
  vcfg.z_dim = 16;
  vcfg.hidden_dim = 32;
  const SubmodelArch arch{scfg.input_dim, 32, scfg.num_classes};
  PartitionConfig pcfg;  // K=4, tau=0.3, gamma=0.3
  TrainConfig tcfg;
  tcfg.epochs = 20;
  tcfg.nu = 0;
  tcfg.batch = 32;
  tcfg.eta = 0.05f;
  tcfg.seed = 1;
  tcfg.patience = 1000;  // convergence is judged on the full schedule

  ToyWorkload w;
  const Dataset train_set = make_cluster_dataset(scfg, 0);
  const auto t0 = Clock::now();
  TrainResult tr = train(train_set, vcfg, arch, pcfg, tcfg);
  w.train_seconds = seconds_since(t0);
  w.log = tr.log;

  Bundle b;
  b.vae_cfg = vcfg;
  b.pcfg = pcfg;
  b.arch = arch;
  b.vae = tr.vae;
  for (std::size_t k = 0; k < tr.gen.num_branches(); ++k)
    b.submodels.push_back(tr.gen.materialize(k));
  w.server.emplace(std::move(b));

  w.heldout = make_cluster_dataset(scfg, 1);
  w.stream = gen_stream(scfg);
  return w;
}

// 6. The toy run at least halves its first-epoch objective.

Outcome check_convergence(const ToyWorkload& w) {
  constexpr double kBudget = 600.0;  // seconds, single-threaded
  if (w.log.empty()) return {false, "no epochs logged"};
  const double first = w.log.front().j;
  const double last = w.log.back().j;
  const bool ok = last <= 0.5 * first && w.train_seconds < kBudget;
  return {ok, fmt("J %.4f -> %.4f (ratio %.3f, bound 0.5) in %.1fs over %zu "
                  "epochs",
                  first, last, last / first, w.train_seconds, w.log.size())};
}

// 7. Partitions specialize: label entropy given the partition is well below
// ln C, and every submodel is most confident on its own partition's data.

Outcome check_specialization(const ToyWorkload& w) {
  const EdgeServer& server = *w.server;
  const Dataset& held = w.heldout;
  const std::size_t n = held.x.rows();
  const std::size_t d = held.x.cols();

  const auto hist = partition_histogram(server, held);
  const double cond = conditional_label_entropy(hist);
  const double cap = std::log(static_cast<double>(held.num_classes));
  if (!(cond < 0.8 * cap))
    return {false, fmt("conditional label entropy %.4f not 20%% below ln C "
                       "= %.4f",
                       cond, cap)};

  std::vector<std::size_t> part(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const float> row(held.x.data.data() + i * d, d);
    part[i] = server.infer(row).partition;
  }

  const std::size_t kBranches = server.bundle().submodels.size();
  std::string gaps;
  for (std::size_t k = 0; k < kBranches; ++k) {
    const Tensor probs =
        submodel_probs(server.bundle().submodels[k].view(), held.x);
    const std::vector<double> ent = row_entropies(probs);
    double own = 0.0, other = 0.0;
    std::size_t n_own = 0, n_other = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (part[i] == k) {
        own += ent[i];
        ++n_own;
      } else {
        other += ent[i];
        ++n_other;
      }
    }
    if (n_own == 0 || n_other == 0)
      return {false, fmt("partition %zu holds no held-out data", k)};
    own /= static_cast<double>(n_own);
    other /= static_cast<double>(n_other);
    if (!(own < other))
      return {false, fmt("submodel %zu: own-partition entropy %.4f >= "
                         "other-partition %.4f",
                         k, own, other)};
    gaps += fmt("%s%.2f", gaps.empty() ? "" : "/", other - own);
  }
  return {true, fmt("conditional label entropy %.3f vs ln C %.3f; "
                    "own-vs-other entropy gaps %s nats",
                    cond, cap, gaps.c_str())};
}

// 8. Hit rate rises with the entropy threshold; accuracy pays for it; every
// individual decision matches the threshold rule exactly.

const std::vector<double> kSweep = {0.0, 0.05, 0.1, 0.2, 0.3, 0.5,
                                    0.7, 0.9,  1.1, 1.3, 1.6, 2.2};
constexpr double kMidThreshold = 0.9;

Outcome check_threshold_sweep(const ExperimentReport& report) {
  double violation_mass = 0.0;
  for (std::size_t i = 0; i + 1 < report.cells.size(); ++i)
    violation_mass += std::max(
        0.0, report.cells[i].hit_rate - report.cells[i + 1].hit_rate);

  std::size_t decision_breaks = 0;
  for (const ThresholdCell& cell : report.cells)
    for (const TraceRecord& rec : cell.trace) {
      const bool want_hit =
          decide(rec.entropy, cell.threshold) == Decision::kHitLocal;
      if (want_hit != (rec.decision == Decision::kHitLocal)) ++decision_breaks;
    }

  // The decision rule itself must be monotone in the threshold on every
  // entropy value the sweep produced.
  std::size_t rule_breaks = 0;
  for (const ThresholdCell& cell : report.cells)
    for (const TraceRecord& rec : cell.trace)
      for (std::size_t i = 0; i + 1 < kSweep.size(); ++i) {
        const bool low = decide(rec.entropy, kSweep[i]) == Decision::kHitLocal;
        const bool high =
            decide(rec.entropy, kSweep[i + 1]) == Decision::kHitLocal;
        if (low && !high) ++rule_breaks;
      }

  const double acc_low = report.cells.front().accuracy;
  const double acc_high = report.cells.back().accuracy;
  const bool ok = violation_mass <= 0.02 && decision_breaks == 0 &&
                  rule_breaks == 0 && acc_high <= acc_low + 1e-12;
  return {ok, fmt("hit rate %.3f -> %.3f, violation mass %.4f (cap 0.02); "
                  "accuracy %.4f -> %.4f; 0 decision breaks over %zu cells",
                  report.cells.front().hit_rate, report.cells.back().hit_rate,
                  violation_mass, acc_low, acc_high, report.cells.size())};
}

// 9. A mid-range threshold keeps inference local at near-full accuracy.

Outcome check_locality(const ExperimentReport& report) {
  const ThresholdCell* mid = nullptr;
  const ThresholdCell* all_edge = nullptr;
  for (const ThresholdCell& cell : report.cells) {
    if (cell.threshold == kMidThreshold) mid = &cell;
    if (cell.threshold == 0.0) all_edge = &cell;
  }
  if (mid == nullptr || all_edge == nullptr)
    return {false, "sweep lacks the pinned reference thresholds"};
  const double gap = std::fabs(mid->accuracy - all_edge->accuracy);
  const bool ok = mid->local_frac >= 0.80 && gap <= 0.05;
  return {ok, fmt("threshold %.1f: local fraction %.4f (floor 0.80); accuracy "
                  "%.4f vs all-edge %.4f (gap %.4f, cap 0.05)",
                  kMidThreshold, mid->local_frac, mid->accuracy,
                  all_edge->accuracy, gap)};
}

// ---------------------------------------------------------------------------
// 10. Wire goldens, random round trips, blob checksum, transport parity.

bool tensors_bit_equal(const Tensor& a, const Tensor& b) {
  if (a.dims != b.dims) return false;
  return std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(float)) == 0;
}

bool submodels_bit_equal(const Submodel& a, const Submodel& b) {
  return tensors_bit_equal(a.trunk_w1, b.trunk_w1) &&
         tensors_bit_equal(a.trunk_b1, b.trunk_b1) &&
         tensors_bit_equal(a.trunk_w2, b.trunk_w2) &&
         tensors_bit_equal(a.trunk_b2, b.trunk_b2) &&
         tensors_bit_equal(a.head_w, b.head_w) &&
         tensors_bit_equal(a.head_b, b.head_b);
}

bool traces_equal(const std::vector<TraceRecord>& a,
                  const std::vector<TraceRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const TraceRecord& x = a[i];
    const TraceRecord& y = b[i];
    if (x.frame_id != y.frame_id || x.decision != y.decision ||
        x.entropy != y.entropy || x.active != y.active ||
        x.evicted != y.evicted || x.label != y.label ||
        x.predicted != y.predicted || x.degraded != y.degraded)
      return false;
  }
  return true;
}

Outcome check_protocol(const ToyWorkload& w) {
  // Golden frame: MODEL_REQ for partition 2.
  const std::vector<std::uint8_t> golden = {0x43, 0x4E, 0x45, 0x54, 0x01, 0x03,
                                            0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                            0x00, 0x04, 0x00, 0x00, 0x00, 0x02};
  const WireMessage req{MsgType::kModelReq, encode_model_req(ModelReq{2})};
  if (encode_message(req) != golden) return {false, "golden frame bytes differ"};
  const WireMessage back = decode_message(golden);
  ModelReq mr;
  if (back != req || !try_decode_model_req(back.payload, mr) || mr.k != 2)
    return {false, "golden frame does not decode to MODEL_REQ k=2"};

  // 10^5 random frames survive encode -> decode bit-exactly.
  CounterRng rng(99, 7);
  for (int i = 0; i < 100000; ++i) {
    WireMessage m;
    m.type = static_cast<MsgType>(1 + rng.next_below(5));
    m.payload.resize(rng.next_below(201));
    for (std::uint8_t& v : m.payload)
      v = static_cast<std::uint8_t>(rng.next_u64());
    if (decode_message(encode_message(m)) != m)
      return {false, fmt("random frame %d failed its round trip", i)};
  }

  // A real submodel blob round-trips bit-exactly, and every single-bit
  // corruption of it is rejected (checksum beyond the fixed header bytes).
  const Submodel& sub = w.server->bundle().submodels[1];
  const std::vector<std::uint8_t> blob = serialize_submodel(sub);
  if (!submodels_bit_equal(deserialize_submodel(blob), sub))
    return {false, "blob round trip is not bit-exact"};
  std::size_t flips = 0;
  for (std::size_t byte = 0; byte < blob.size(); ++byte)
    for (int bit = 0; bit < 8; ++bit) {
      std::vector<std::uint8_t> bad = blob;
      bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
      bool caught = false;
      bool integrity = false;
      try {
        (void)deserialize_submodel(bad);
      } catch (const IntegrityError&) {
        caught = integrity = true;
      } catch (const std::exception&) {
        caught = true;
      }
      if (!caught)
        return {false, fmt("bit %d of byte %zu slipped through", bit, byte)};
      if (byte >= 5 && !integrity)
        return {false, fmt("byte %zu flip missed the checksum", byte)};
      ++flips;
    }

  // Identical traces from the in-process reference, the loopback codec
  // transport, and a real TCP connection.
  CacheState direct_state(2, kMidThreshold);
  const std::vector<TraceRecord> direct =
      simulate_device(*w.server, w.stream, direct_state);

  CacheState loop_state(2, kMidThreshold);
  InProcessConnection loop(*w.server);
  const std::vector<TraceRecord> in_process =
      device_loop(w.stream, loop_state, loop);

  SocketServer tcp(*w.server, 0);
  auto conn = SocketConnection::dial("127.0.0.1", tcp.port());
  if (!conn) {
    tcp.stop();
    return {false, "could not dial the loopback server"};
  }
  CacheState tcp_state(2, kMidThreshold);
  const std::vector<TraceRecord> over_tcp =
      device_loop(w.stream, tcp_state, *conn);
  tcp.stop();

  if (!traces_equal(direct, in_process))
    return {false, "in-process transport diverges from the reference"};
  if (!traces_equal(direct, over_tcp))
    return {false, "TCP transport diverges from the reference"};
  for (const TraceRecord& rec : over_tcp)
    if (rec.degraded) return {false, "TCP run degraded unexpectedly"};

  return {true, fmt("golden frame, 100000 round trips, %zu bit flips caught, "
                    "3 transports trace-identical over %zu frames",
                    flips, over_tcp.size())};
}

}  // namespace

int main() {
  verdict(1, "finite-difference audit of all four objectives",
          guarded(check_gradients));
  verdict(2, "angular code goldens (K=4, gamma=0.3, tau=0.3)",
          guarded(check_code_goldens));
  verdict(3, "decay-width identity and membership radius",
          guarded(check_width_identity));
  verdict(4, "LRU monotonicity and stepwise inclusion; FIFO control",
          guarded(check_lru_monotone));
  verdict(5, "golden LRU miss counts", guarded(check_lru_goldens));

  std::optional<ToyWorkload> toy;
  std::string build_error;
  try {
    toy.emplace(build_toy_workload());
  } catch (const std::exception& e) {
    build_error = fmt("toy workload unavailable: %s", e.what());
  }

  std::optional<ExperimentReport> report;
  if (toy) {
    try {
      report.emplace(run_experiment(*toy->server, toy->stream, kSweep, 2));
    } catch (const std::exception& e) {
      build_error = fmt("threshold sweep unavailable: %s", e.what());
    }
  }

  const Outcome unavailable{false, build_error};
  verdict(6, "toy training halves the starting objective",
          toy ? guarded([&] { return check_convergence(*toy); }) : unavailable);
  verdict(7, "partition specialization on held-out data",
          toy ? guarded([&] { return check_specialization(*toy); })
              : unavailable);
  verdict(8, "hit rate monotone in threshold; accuracy trade-off",
          report ? guarded([&] { return check_threshold_sweep(*report); })
                 : unavailable);
  verdict(9, "mid-threshold locality with near-full accuracy",
          report ? guarded([&] { return check_locality(*report); })
                 : unavailable);
  verdict(10, "wire goldens, round-trips, checksum, transport parity",
          toy ? guarded([&] { return check_protocol(*toy); }) : unavailable);

  std::printf("%d/10 checks passed\n", 10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
