#pragma once

// Synthetic data with known structure: rows belong to latent groups and to
// technical batches, carry a log library-size offset, and the response is
// drawn from the chosen family at mu = g^{-1}(X B^T + Gamma Z^T + U V^T).
//
// Design: X = [1, batch indicators for batches 2..K], Z = 1_m, so Gamma is
// the per-row log library size. U rows are the row's group centroid plus
// small Gaussian noise, V is Gaussian.
//
// Random streams: global parameters (centroids, B, V) come from a stream
// seeded with splitmix64(seed); row i uses its own stream seeded with
// splitmix64(seed ^ splitmix64(i + 1)), so results do not depend on the
// thread count.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gmfkit/model.hpp"

namespace gmfkit {

struct SimConfig {
  Index n = 200;
  Index m = 50;
  Index d_true = 5;
  int n_groups = 5;
  std::vector<double> group_probs{0.1, 0.2, 0.2, 0.2, 0.3};
  int n_batches = 3;
  double batch_effect_scale = 1.0;
  double libsize_log_sd = 0.5;
  FamilySpec family{FamilyKind::Poisson};
  LinkSpec link{LinkKind::Log};
  double intercept_mean = 1.0;
  double intercept_sd = 0.5;
  double centroid_scale = 1.0;
  double within_group_sd = 0.1;
  double loading_sd = 0.5;
  /// Dispersion for Gaussian, Gamma and inverse Gaussian draws.
  double phi = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// "small" (200 x 50), "medium" (1000 x 100) or "large" (5000 x 500).
SimConfig sim_preset(std::string_view name);

struct SimTruth {
  std::vector<int> groups;
  std::vector<int> batches;
  FactorizationState params;
  Matrix mu;
  /// True when V was shrunk to keep the means representable.
  bool rescaled = false;
};

struct SimData {
  ResponseMatrix data;
  CovariateSet covs;
  SimTruth truth;
};

SimData generate(const SimConfig& cfg);

std::uint64_t splitmix64(std::uint64_t x);

/// One draw from the family at mean mu with dispersion phi.
double sample_response(const FamilySpec& fam, double mu, double phi, std::mt19937_64& rng);

}  // namespace gmfkit
