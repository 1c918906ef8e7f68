#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace gmfcli {

struct FitArgs {
  ModelOptions model;
  OptimOptions optim;
  long rank = 2;
  std::uint64_t seed = 0;
  std::string out;
};

struct CvArgs {
  ModelOptions model;
  OptimOptions optim;
  /// "1,2,3", "1:8" or a mix such as "1:3,5".
  std::string ranks = "1:5";
  int folds = 5;
  double holdout_fraction = 0.3;
  /// cv, aic, bic, scree or all. scree skips every fit.
  std::string criterion = "cv";
  long scree_max_rank = 0;
  bool no_warm_start = false;
  std::uint64_t seed = 0;
  std::string out;
};

struct EvalArgs {
  ModelOptions model;
  OptimOptions optim;
  long rank = 2;
  double holdout_fraction = 0.2;
  /// Evaluate a saved fit instead of fitting on a holdout split.
  std::string fit_dir;
  std::string test_mask;
  std::uint64_t seed = 0;
  std::string out;
};

struct SimulateArgs {
  std::string preset = "small";
  std::optional<long> n;
  std::optional<long> m;
  std::optional<long> rank;
  std::optional<int> groups;
  std::vector<double> group_probs;
  std::optional<int> batches;
  std::optional<double> batch_scale;
  std::optional<double> libsize_sd;
  std::string family = "poisson";
  std::string link;
  double nb_shape = 1.0;
  double phi = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_fit(const FitArgs& a, RunRecord& rec);
int run_cv(const CvArgs& a, RunRecord& rec);
int run_eval(const EvalArgs& a, RunRecord& rec);
int run_simulate(const SimulateArgs& a, RunRecord& rec);

std::vector<gmfkit::Index> parse_ranks(const std::string& text);

}  // namespace gmfcli
