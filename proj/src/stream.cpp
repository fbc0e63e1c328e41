// SPDX-License-Identifier: Apache-2.0
#include "cachenet/stream.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "cachenet/errors.hpp"
#include "cachenet/rng.hpp"

namespace cachenet {

void StreamConfig::validate() const {
  if (num_classes < 2) throw ConfigError("stream: need >= 2 classes");
  if (input_dim < 2) throw ConfigError("stream: need >= 2 input dims");
  if (samples_per_class == 0) throw ConfigError("stream: empty class pools");
  if (mean_run_length < 1.0) throw ConfigError("stream: run length must be >= 1");
  if (frames == 0) throw ConfigError("stream: need at least one frame");
  if (cluster_radius <= 0.0 || cluster_spread < 0.0 || noise_std < 0.0)
    throw ConfigError("stream: invalid cluster geometry");
}

std::vector<Tensor> class_means(const StreamConfig& cfg) {
  cfg.validate();
  CounterRng rng(cfg.seed, /*stream=*/10);
  std::vector<Tensor> means;
  means.reserve(cfg.num_classes);
  const double step = 2.0 * 3.14159265358979323846 /
                      static_cast<double>(cfg.num_classes);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    std::vector<float> m(cfg.input_dim);
    m[0] = static_cast<float>(cfg.cluster_radius * std::cos(step * static_cast<double>(c)));
    m[1] = static_cast<float>(cfg.cluster_radius * std::sin(step * static_cast<double>(c)));
    for (std::size_t d = 2; d < cfg.input_dim; ++d)
      m[d] = rng.next_normal() * static_cast<float>(cfg.cluster_spread);
    means.push_back(Tensor({cfg.input_dim}, std::move(m)));
  }
  return means;
}

namespace {

// One draw from class c's cluster, appended to out.
void sample_into(std::vector<float>& out, const Tensor& mean, double noise_std,
                 CounterRng& rng) {
  for (std::size_t d = 0; d < mean.numel(); ++d)
    out.push_back(mean.data[d] +
                  rng.next_normal() * static_cast<float>(noise_std));
}

}  // namespace

Dataset make_cluster_dataset(const StreamConfig& cfg,
                             std::uint64_t stream_sel) {
  const std::vector<Tensor> means = class_means(cfg);
  CounterRng rng(cfg.seed, /*stream=*/11 + stream_sel);
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  const std::size_t n = cfg.num_classes * cfg.samples_per_class;
  ds.y.reserve(n);
  std::vector<float> rows;
  rows.reserve(n * cfg.input_dim);
  for (std::size_t i = 0; i < cfg.samples_per_class; ++i)
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      sample_into(rows, means[c], cfg.noise_std, rng);
      ds.y.push_back(static_cast<int>(c));
    }
  ds.x = Tensor({n, cfg.input_dim}, std::move(rows));
  return ds;
}

Dataset gen_stream(const StreamConfig& cfg) {
  const std::vector<Tensor> means = class_means(cfg);
  CounterRng pool_rng(cfg.seed, /*stream=*/20);
  // Per-class frame pools, sampled once; the walk re-uses pool members.
  std::vector<std::vector<float>> pools(cfg.num_classes);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    pools[c].reserve(cfg.samples_per_class * cfg.input_dim);
    for (std::size_t i = 0; i < cfg.samples_per_class; ++i)
      sample_into(pools[c], means[c], cfg.noise_std, pool_rng);
  }

  CounterRng walk(cfg.seed, /*stream=*/21);
  const double stay = 1.0 - 1.0 / cfg.mean_run_length;
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.y.reserve(cfg.frames);
  std::vector<float> rows;
  rows.reserve(cfg.frames * cfg.input_dim);

  std::size_t cur = walk.next_below(cfg.num_classes);
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    if (f > 0 && walk.next_uniform() >= stay) {
      // Hop a uniform nonzero distance so the next class is never the same.
      const std::size_t hop = 1 + walk.next_below(cfg.num_classes - 1);
      cur = (cur + hop) % cfg.num_classes;
    }
    const std::size_t pick = walk.next_below(cfg.samples_per_class);
    const float* row = pools[cur].data() + pick * cfg.input_dim;
    rows.insert(rows.end(), row, row + cfg.input_dim);
    ds.y.push_back(static_cast<int>(cur));
  }
  ds.x = Tensor({cfg.frames, cfg.input_dim}, std::move(rows));
  return ds;
}

}  // namespace cachenet
