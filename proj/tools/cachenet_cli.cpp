// SPDX-License-Identifier: Apache-2.0
// Command-line workbench: train bundles, serve them over TCP, run device
// loops and in-process simulations, and audit the cache and the gradients.
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cachenet/cache.hpp"
#include "cachenet/device.hpp"
#include "cachenet/errors.hpp"
#include "cachenet/graph.hpp"
#include "cachenet/harness.hpp"
#include "cachenet/kvconfig.hpp"
#include "cachenet/model_io.hpp"
#include "cachenet/partition.hpp"
#include "cachenet/rng.hpp"
#include "cachenet/server.hpp"
#include "cachenet/stream.hpp"
#include "cachenet/submodels.hpp"
#include "cachenet/train.hpp"
#include "cachenet/transport.hpp"

using namespace cachenet;

namespace {

// Every tunable in one place. Defaults are the toy workload; a config file
// overrides defaults, --set pairs override the file, --seed overrides last.
struct ToolConfig {
  StreamConfig stream;
  StackedVaeConfig vae;
  SubmodelArch arch;
  PartitionConfig pcfg;
  TrainConfig tcfg;
  std::size_t capacity = 2;
  double threshold = 0.9;
  std::vector<double> thresholds = {0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3};
  std::uint64_t seed = 1;

  void finalize();
};

std::vector<double> parse_threshold_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size())
      throw ConfigError("thresholds: bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("thresholds: empty list");
  return out;
}

void apply_kv(ToolConfig& cfg, const KvMap& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "num_classes") cfg.stream.num_classes = kv_int(kv, key);
    else if (key == "input_dim") cfg.stream.input_dim = kv_int(kv, key);
    else if (key == "samples_per_class") cfg.stream.samples_per_class = kv_int(kv, key);
    else if (key == "mean_run_length") cfg.stream.mean_run_length = kv_double(kv, key);
    else if (key == "frames") cfg.stream.frames = kv_int(kv, key);
    else if (key == "cluster_radius") cfg.stream.cluster_radius = kv_double(kv, key);
    else if (key == "cluster_spread") cfg.stream.cluster_spread = kv_double(kv, key);
    else if (key == "noise_std") cfg.stream.noise_std = kv_double(kv, key);
    else if (key == "z_dim") cfg.vae.z_dim = kv_int(kv, key);
    else if (key == "hidden_dim") cfg.vae.hidden_dim = kv_int(kv, key);
    else if (key == "alpha_info") cfg.vae.alpha_info = static_cast<float>(kv_double(kv, key));
    else if (key == "lambda_scale") cfg.vae.lambda_scale = static_cast<float>(kv_double(kv, key));
    else if (key == "arch_hidden") cfg.arch.hidden_dim = kv_int(kv, key);
    else if (key == "k") cfg.pcfg.k = kv_int(kv, key);
    else if (key == "tau") cfg.pcfg.tau = kv_double(kv, key);
    else if (key == "gamma") cfg.pcfg.gamma = kv_double(kv, key);
    else if (key == "alpha_mix") cfg.pcfg.alpha_mix = kv_double(kv, key);
    else if (key == "epsilon_std") cfg.pcfg.epsilon_std = kv_double(kv, key);
    else if (key == "epochs") cfg.tcfg.epochs = kv_int(kv, key);
    else if (key == "nu") cfg.tcfg.nu = kv_int(kv, key);
    else if (key == "batch") cfg.tcfg.batch = kv_int(kv, key);
    else if (key == "eta") cfg.tcfg.eta = static_cast<float>(kv_double(kv, key));
    else if (key == "patience") cfg.tcfg.patience = kv_int(kv, key);
    else if (key == "capacity") cfg.capacity = kv_int(kv, key);
    else if (key == "threshold") cfg.threshold = kv_double(kv, key);
    else if (key == "thresholds") cfg.thresholds = parse_threshold_list(kv_string(kv, key));
    else if (key == "seed") cfg.seed = kv_int(kv, key);
    else throw ConfigError("unknown config key: " + key);
  }
}

// Derived fields the separate configs must agree on.
void ToolConfig::finalize() {
  vae.input_dim = stream.input_dim;
  arch.input_dim = stream.input_dim;
  arch.num_classes = stream.num_classes;
  stream.seed = seed;
  tcfg.seed = seed;
  stream.validate();
  pcfg.validate();
}

ToolConfig resolve_config(const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          const std::uint64_t* seed_flag) {
  ToolConfig cfg;
  if (!config_path.empty()) apply_kv(cfg, load_kv_file(config_path));
  for (const std::string& pair : overrides) apply_kv(cfg, parse_kv(pair));
  if (seed_flag != nullptr) cfg.seed = *seed_flag;
  cfg.finalize();
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Bundle train_bundle(const ToolConfig& cfg, const std::string& out_dir) {
  const Dataset data = make_cluster_dataset(cfg.stream, 0);
  const TrainResult r = train(data, cfg.vae, cfg.arch, cfg.pcfg, cfg.tcfg);
  save_bundle(out_dir, r.vae, r.gen, cfg.pcfg);
  write_file_atomic(out_dir + "/losses.csv", losses_csv(r.log));
  std::printf("trained %zu epoch(s)%s; J %.6f -> %.6f\n", r.log.size(),
              r.early_stopped ? " (early stop)" : "", r.log.front().j,
              r.log.back().j);
  return load_bundle(out_dir);
}

int cmd_train(const ToolConfig& cfg, const std::string& out_dir) {
  train_bundle(cfg, out_dir);
  std::printf("bundle written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_serve(const std::string& bundle_dir, std::uint16_t port) {
  // Block the shutdown signals before any server thread exists: spawned
  // threads inherit the mask, leaving the sigwait below as the only
  // consumer. Blocking afterwards would let the kernel deliver the signal
  // to a server thread, whose default disposition kills the process.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const EdgeServer server(load_bundle(bundle_dir));
  SocketServer srv(server, port);
  std::printf("listening on 127.0.0.1:%u\n", srv.port());
  std::fflush(stdout);

  int sig = 0;
  sigwait(&set, &sig);
  srv.stop();
  std::printf("stopped\n");
  return 0;
}

int cmd_device(const ToolConfig& cfg, const std::string& host,
               std::uint16_t port, const std::string& out_path) {
  const Dataset stream = gen_stream(cfg.stream);
  auto conn = SocketConnection::dial(host, port);
  if (conn == nullptr) {
    std::fprintf(stderr, "error: no edge server reachable at %s:%u\n",
                 host.c_str(), port);
    return 1;
  }
  CacheState state(cfg.capacity, cfg.threshold);
  const auto trace = device_loop(stream, state, *conn);

  std::size_t hits = 0;
  std::size_t degraded = 0;
  std::size_t correct = 0;
  for (const TraceRecord& rec : trace) {
    if (rec.decision == Decision::kHitLocal) ++hits;
    if (rec.degraded) ++degraded;
    if (rec.predicted == rec.label) ++correct;
  }
  const double n = static_cast<double>(trace.size());
  std::printf("frames %zu  hit_rate %.4f  accuracy %.4f  degraded %zu\n",
              trace.size(), static_cast<double>(hits) / n,
              static_cast<double>(correct) / n, degraded);
  if (!out_path.empty()) {
    write_file_atomic(out_path, trace_csv(trace));
    std::printf("trace written to %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_simulate(const ToolConfig& cfg, const std::string& bundle_dir,
                 const std::string& out_dir) {
  const Bundle bundle = bundle_dir.empty()
                            ? train_bundle(cfg, out_dir + "/bundle")
                            : load_bundle(bundle_dir);
  const EdgeServer server(bundle);
  const Dataset stream = gen_stream(cfg.stream);
  const ExperimentReport report =
      run_experiment(server, stream, cfg.thresholds, cfg.capacity);

  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir + "/report.csv", report_csv(report));
  for (std::size_t i = 0; i < report.cells.size(); ++i)
    write_file_atomic(out_dir + "/trace_" + std::to_string(i) + ".csv",
                      trace_csv(report.cells[i].trace));
  std::printf("%s", report_csv(report).c_str());
  std::printf("report written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_belady(std::size_t traces, std::size_t num_indices,
               std::size_t max_capacity, std::uint64_t seed) {
  const BeladyReport rep =
      belady_check(traces, num_indices, max_capacity, seed, Policy::kLru);
  std::printf("violations: %zu (over %zu capacity pairs)\n", rep.violations,
              rep.pairs);
  return 0;
}

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// Finite-difference audit of every parameter gradient of one loss graph.
GradCheckCase fd_over_leaves(const std::string& name, ad::Graph& g,
                             ad::NodeId loss,
                             const std::vector<ad::NodeId>& leaves) {
  GradCheckCase out{name, 0.0, 0, 0};
  for (ad::NodeId leaf : leaves) {
    const ad::FiniteDiffReport rep =
        ad::finite_diff_check_detailed(g, loss, leaf, 1e-3);
    out.max_rel_err = std::max(out.max_rel_err, rep.max_rel_err);
    out.checked += rep.checked;
    out.skipped += rep.skipped;
  }
  return out;
}

int cmd_gradcheck(std::uint64_t seed) {
  // Small enough to finish in seconds, wide enough to exercise every op.
  StackedVaeConfig vcfg;
  vcfg.input_dim = 6;
  vcfg.z_dim = 5;
  vcfg.hidden_dim = 7;
  const SubmodelArch arch{6, 7, 3};
  constexpr std::size_t kBranches = 3;
  constexpr std::size_t kBatch = 6;

  const StackedVae vae = StackedVae::init(vcfg, seed);
  const Generator gen = Generator::init(arch, kBranches, seed + 1);
  CounterRng rng(seed, 2);
  Tensor x = Tensor::randn({kBatch, vcfg.input_dim}, rng, 1.0f);
  std::vector<int> labels(kBatch);
  for (int& y : labels) y = static_cast<int>(rng.next_below(arch.num_classes));
  std::vector<std::vector<std::size_t>> psets(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) psets[i] = {i % kBranches};
  const std::vector<Tensor> masks =
      partition_masks(psets, labels, kBranches, arch.num_classes);

  std::vector<GradCheckCase> cases;
  {
    ad::Graph g(seed + 3);
    const VaeLossNodes s1 = build_loss_infovae(g, vae, x);
    cases.push_back(fd_over_leaves("encoder stage-1 objective", g, s1.loss, s1.params));
  }
  {
    ad::Graph g(seed + 4);
    CounterRng zr(seed, 5);
    const Tensor z = Tensor::randn({kBatch, vcfg.z_dim}, zr, 1.0f);
    const VaeLossNodes s2 = build_loss_stage2(g, vae, z);
    cases.push_back(fd_over_leaves("encoder stage-2 objective", g, s2.loss, s2.params));
  }
  {
    ad::Graph g(seed + 6);
    const JfNodes jf = build_loss_jf(g, gen, x, masks);
    cases.push_back(fd_over_leaves("classification objective", g, jf.loss, jf.chi));
  }
  {
    ad::Graph g(seed + 7);
    const TotalNodes t = build_loss_total(
        g, vae, gen, x, [&](const Tensor&) { return masks; });
    std::vector<ad::NodeId> leaves = t.s1.params;
    leaves.insert(leaves.end(), t.s2.params.begin(), t.s2.params.end());
    leaves.insert(leaves.end(), t.jf.chi.begin(), t.jf.chi.end());
    cases.push_back(fd_over_leaves("joint objective", g, t.loss, leaves));
  }

  constexpr double kBound = 1e-4;
  int failures = 0;
  for (const GradCheckCase& c : cases) {
    const bool ok = c.max_rel_err < kBound && c.checked > 0;
    if (!ok) ++failures;
    std::printf("%-28s max_rel_err %.3e  checked %zu  skipped %zu  %s\n",
                c.name.c_str(), c.max_rel_err, c.checked, c.skipped,
                ok ? "ok" : "FAIL");
  }
  return failures == 0 ? 0 : 1;
}

int cmd_report(const std::string& trace_path) {
  const auto trace = parse_trace_csv(read_file(trace_path));
  if (trace.empty()) {
    std::fprintf(stderr, "error: empty trace\n");
    return 1;
  }
  std::size_t hits = 0;
  std::size_t degraded = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> evictions;
  for (const TraceRecord& rec : trace) {
    if (rec.decision == Decision::kHitLocal) ++hits;
    if (rec.degraded) ++degraded;
    if (rec.predicted == rec.label) ++correct;
    if (rec.evicted) evictions.push_back(*rec.evicted);
  }
  const double n = static_cast<double>(trace.size());
  std::printf("frames     %zu\n", trace.size());
  std::printf("hit_rate   %.4f\n", static_cast<double>(hits) / n);
  std::printf("accuracy   %.4f\n", static_cast<double>(correct) / n);
  std::printf("local_frac %.4f\n", static_cast<double>(hits + degraded) / n);
  std::printf("degraded   %zu\n", degraded);
  std::printf("evictions  %zu\n", evictions.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model-caching workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "flat key=value config file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one key, e.g. --set frames=100");
  app.add_option("--seed", seed_flag, "override the run seed")
      ->each([&](const std::string&) { seed_given = true; });

  std::string out_dir = "out";
  std::string bundle_dir;
  std::string host = "127.0.0.1";
  std::uint16_t port = 4640;
  std::string trace_out;
  std::string trace_in;
  std::size_t belady_traces = 100;
  std::size_t belady_indices = 8;
  std::size_t belady_capacity = 8;

  CLI::App* c_train = app.add_subcommand("train", "fit a bundle and write it");
  c_train->add_option("--out", out_dir, "bundle output directory");
  CLI::App* c_serve = app.add_subcommand("serve", "serve a bundle over TCP");
  c_serve->add_option("--bundle", bundle_dir, "bundle directory")->required();
  c_serve->add_option("--port", port, "TCP port (0 picks one)");
  CLI::App* c_device = app.add_subcommand("device", "run a device loop against a server");
  c_device->add_option("--host", host, "server address");
  c_device->add_option("--port", port, "server port");
  c_device->add_option("--out", trace_out, "write the trace CSV here");
  CLI::App* c_sim = app.add_subcommand("simulate", "in-process end-to-end sweep");
  c_sim->add_option("--bundle", bundle_dir, "reuse a trained bundle");
  c_sim->add_option("--out", out_dir, "output directory");
  CLI::App* c_belady = app.add_subcommand("belady", "cache monotonicity audit");
  c_belady->add_option("--traces", belady_traces, "number of random traces");
  c_belady->add_option("--K", belady_indices, "request alphabet size");
  c_belady->add_option("--capacity-max", belady_capacity, "largest capacity");
  CLI::App* c_grad = app.add_subcommand("gradcheck", "finite-difference audit");
  CLI::App* c_report = app.add_subcommand("report", "summarize a trace CSV");
  c_report->add_option("--trace", trace_in, "trace CSV path")->required();

  // Global options (--config/--set/--seed) are accepted after the
  // subcommand name too.
  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const ToolConfig cfg = resolve_config(config_path, overrides,
                                          seed_given ? &seed_flag : nullptr);
    if (app.got_subcommand(c_train)) return cmd_train(cfg, out_dir);
    if (app.got_subcommand(c_serve)) return cmd_serve(bundle_dir, port);
    if (app.got_subcommand(c_device)) return cmd_device(cfg, host, port, trace_out);
    if (app.got_subcommand(c_sim)) return cmd_simulate(cfg, bundle_dir, out_dir);
    if (app.got_subcommand(c_belady))
      return cmd_belady(belady_traces, belady_indices, belady_capacity, cfg.seed);
    if (app.got_subcommand(c_grad)) return cmd_gradcheck(cfg.seed);
    if (app.got_subcommand(c_report)) return cmd_report(trace_in);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
