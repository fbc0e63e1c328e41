// SPDX-License-Identifier: Apache-2.0
#include "cachenet/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cachenet/errors.hpp"

namespace cachenet {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double PartitionConfig::sigma() const { return sigma_from(k, gamma, tau); }

void PartitionConfig::validate() const {
  if (k < 2) throw ConfigError("partition count must be at least 2");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConfigError("gamma must lie in [0, 1)");
  if (!(alpha_mix >= 0.0 && alpha_mix <= 1.0))
    throw ConfigError("alpha_mix must lie in [0, 1]");
  if (!(epsilon_std >= 0.0)) throw ConfigError("epsilon_std must be >= 0");
}

double angle_of(double x, double y) {
  if (x > 0.0) return std::atan(y / x);
  if (x < 0.0) return y >= 0.0 ? std::atan(y / x) + kPi : std::atan(y / x) - kPi;
  if (y > 0.0) return kPi / 2.0;
  if (y < 0.0) return -kPi / 2.0;
  return 0.0;
}

double jitter(double theta, double eps) {
  double r = std::fmod(theta + eps, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;  // rounding guard at the seam
  return r;
}

std::vector<double> midpoints(std::size_t k) {
  if (k < 2) throw ConfigError("midpoints: need at least 2 sectors");
  std::vector<double> zeta(k);
  for (std::size_t i = 0; i < k; ++i)
    zeta[i] = kTwoPi * (static_cast<double>(i) + 0.5) / static_cast<double>(k);
  return zeta;
}

double sigma_from(std::size_t k, double gamma, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (k < 2) throw ConfigError("sigma_from: need at least 2 sectors");
  // Written so that sigma * sqrt(-2 ln tau) reproduces the half-width
  // pi*(1+gamma)/k to machine precision.
  return kPi * (1.0 + gamma) /
         (static_cast<double>(k) * std::sqrt(-2.0 * std::log(tau)));
}

std::vector<double> soft_code(double theta, const std::vector<double>& zeta,
                              double sigma) {
  std::vector<double> c(zeta.size());
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < zeta.size(); ++i) {
    double acc = 0.0;
    for (int n = -1; n <= 1; ++n) {
      const double d = zeta[i] - theta + kTwoPi * n;
      acc += std::exp(-d * d * inv);
    }
    c[i] = acc;
  }
  return c;
}

std::vector<double> uncertainty_code(const std::vector<double>& entropies,
                                     double tau) {
  if (entropies.empty()) throw ConfigError("uncertainty_code: empty input");
  const std::size_t best = static_cast<std::size_t>(
      std::min_element(entropies.begin(), entropies.end()) -
      entropies.begin());
  std::vector<double> c(entropies.size(), 0.0);
  c[best] = tau;
  return c;
}

std::vector<double> combine(const std::vector<double>& cbar,
                            const std::vector<double>& cunc,
                            double alpha_mix) {
  if (cbar.size() != cunc.size())
    throw ShapeError("combine: code length mismatch");
  std::vector<double> c(cbar.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = alpha_mix * cbar[i] + (1.0 - alpha_mix) * cunc[i];
  return c;
}

std::vector<std::size_t> partition_set(const std::vector<double>& c,
                                       double tau) {
  if (c.empty()) throw ConfigError("partition_set: empty code");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] >= tau / 2.0) out.push_back(i);
  if (out.empty()) out.push_back(select_submodel(c));
  return out;
}

std::size_t select_submodel(const std::vector<double>& cbar) {
  if (cbar.empty()) throw ConfigError("select_submodel: empty code");
  // std::max_element keeps the first of equal maxima: ties to lowest index.
  return static_cast<std::size_t>(
      std::max_element(cbar.begin(), cbar.end()) - cbar.begin());
}

double circular_distance(double a, double b) {
  double d = std::fabs(std::fmod(a - b, kTwoPi));
  if (d > kPi) d = kTwoPi - d;
  return d;
}

}  // namespace cachenet
