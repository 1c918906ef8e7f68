#pragma once

// Shared pieces of the gmfkit command-line tool: option structs, input
// loading, and the manifest / runtime sidecar written next to every output.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gmfkit/gmfkit.hpp"
#include "json.hpp"

namespace gmfcli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kInputError = 1, kDiverged = 2, kNotConverged = 3 };

/// Data and model options shared by fit, cv and eval.
struct ModelOptions {
  std::string data;
  std::string mask;
  std::string weights;
  std::string row_covariates;
  std::string col_covariates;
  bool no_intercept = false;
  std::string family = "poisson";
  std::string link;
  double nb_shape = 1.0;
  double lambda = 1.0;
  std::vector<double> penalty{0.0, 0.0, 1.0, 1.0};
  std::string init = "ols-svd";
};

/// Optimizer options; each flag maps onto the matching algorithm's config.
struct OptimOptions {
  std::string algorithm = "asgd";
  int max_epochs = 500;
  int max_iter = 200;
  double tol = 1e-5;
  double damping = 1e-3;
  int nafill_every = 1;
  double newton_stepsize = 0.2;
  double airwls_stepsize = 1.0;
  int airwls_nsteps = 1;
  double rate_k0 = 0.01;
  double rate_k1 = 0.01;
  double rate_tau = 0.75;
  long batch_rows = 100;
  long batch_cols = 20;
  double smooth_a1 = 0.1;
  double smooth_a2 = 0.01;
  std::string dispersion = "auto";
  std::string identify = "B1";
};

struct Inputs {
  gmfkit::ResponseMatrix data;
  gmfkit::CovariateSet covs;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  gmfkit::FamilySpec family;
  gmfkit::LinkSpec link;
  gmfkit::PenaltyConfig penalty;
  gmfkit::InitMethod init;
  /// Files read, for the manifest checksums.
  std::vector<std::string> files;
};

Inputs load_inputs(const ModelOptions& opt, std::uint64_t seed);
gmfkit::FitSettings fit_settings(const OptimOptions& opt, std::uint64_t seed);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// Everything needed to re-run a command: its arguments, the resolved
/// configuration, seed, input checksums and library version. Wall-clock and
/// memory go to runtime.json so that manifest.json itself is reproducible.
struct RunRecord {
  std::string command;
  std::vector<std::string> args;
  std::string config_snapshot;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  /// Checksummed with the inputs when set.
  std::string config_file;
  int threads = 1;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

void write_manifest(const fs::path& out, const RunRecord& rec, const ordered_json& outputs);
void write_runtime(const fs::path& out, const RunRecord& rec);
void write_json(const fs::path& path, const ordered_json& value);
ordered_json read_json(const fs::path& path);

/// Non-finite values become null.
ordered_json number(double x);
ordered_json numbers(const std::vector<double>& xs);

std::vector<std::string> numbered(const std::string& prefix, gmfkit::Index count);

/// Writes U, V, B and Gamma with row / column labels.
void write_factors(const fs::path& out, const gmfkit::FactorizationState& state,
                   const Inputs& in);

/// Fit-report body shared by fit and eval.
ordered_json fit_report_json(const gmfkit::FitResult& fit, const Inputs& in,
                             const gmfkit::FitSettings& settings);

}  // namespace gmfcli
