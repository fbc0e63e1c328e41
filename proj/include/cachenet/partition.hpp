// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace cachenet {

// Angular soft-partitioning of the 2-D latent plane: K sectors centered on
// evenly spaced midpoints, Gaussian membership decay, threshold tau, overlap
// ratio gamma.
struct PartitionConfig {
  std::size_t k = 4;
  double tau = 0.3;
  double gamma = 0.3;
  double alpha_mix = 0.5;       // weight of the angular code vs. uncertainty
  double epsilon_std = 0.05;    // training-time angle jitter, radians

  // Decay width derived from (k, gamma, tau); see sigma_from.
  double sigma() const;
  void validate() const;  // throws ConfigError
};

// Angle of a 2-D point in (-pi, pi]; 0 at the origin.
double angle_of(double x, double y);

// (theta + eps) wrapped into [0, 2*pi).
double jitter(double theta, double eps);

// Sector midpoints zeta_k = 2*pi*(k - 1/2)/K, k = 1..K. Requires K >= 2.
std::vector<double> midpoints(std::size_t k);

// Decay width such that membership drops to tau exactly at the half-width
// pi*(1+gamma)/K from a midpoint.
double sigma_from(std::size_t k, double gamma, double tau);

// Wrapped Gaussian membership of theta (in [0, 2*pi)) against each midpoint.
std::vector<double> soft_code(double theta, const std::vector<double>& zeta,
                              double sigma);

// One-hot at the least-uncertain index, scaled by tau. Ties to lowest index.
std::vector<double> uncertainty_code(const std::vector<double>& entropies,
                                     double tau);

// c = alpha_mix * cbar + (1 - alpha_mix) * cunc.
std::vector<double> combine(const std::vector<double>& cbar,
                            const std::vector<double>& cunc,
                            double alpha_mix);

// Indices k with c_k >= tau/2; never empty (falls back to the argmax).
std::vector<std::size_t> partition_set(const std::vector<double>& c,
                                       double tau);

// Argmax of the soft code, ties to lowest index.
std::size_t select_submodel(const std::vector<double>& cbar);

// Shortest angular distance between two angles, in [0, pi].
double circular_distance(double a, double b);

}  // namespace cachenet
