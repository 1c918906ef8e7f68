#pragma once

// Fitting algorithms: block-wise adaptive SGD, diagonal quasi-Newton and
// alternated IRWLS, plus their shared building blocks.
//
// aSGD and quasi-Newton work on a private copy of the data in which
// unobserved entries carry the current fitted means (refreshed every
// `nafill_every` updates). AIRWLS leaves unobserved entries out of its row
// and column solves instead. Observed entries are never written. Objective
// traces and convergence checks use the observed entries only.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmfkit/derivatives.hpp"
#include "gmfkit/errors.hpp"
#include "gmfkit/identify.hpp"

namespace gmfkit {

/// Raised when the objective or the parameters stop being finite. Carries
/// the last state whose objective was finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, FactorizationState last)
      : Error(what), last_(std::move(last)) {}
  const FactorizationState& last_state() const { return last_; }

 private:
  FactorizationState last_;
};

/// Settings shared by the three algorithms.
struct FitControls {
  double damping = 1e-3;
  double tol = 1e-5;
  /// Updates between refills of unobserved entries (0 disables refills).
  /// Not used by AIRWLS.
  int nafill_every = 1;
  /// Unset: estimate for Gaussian, Gamma and inverse Gaussian only.
  std::optional<bool> estimate_dispersion;
  bool estimate_nb_shape = true;
  double nb_shape_floor = 1e-4;
  double nb_shape_max = 1e8;
  double phi_floor = 1e-10;
  /// Apply the identifiability projection to the returned state.
  bool project = true;
  IdentifiabilityMode identify = IdentifiabilityMode::B1;
  /// Objective evaluations use at most this many observed entries.
  Index objective_sample = 100000;
  std::uint64_t seed = 0;

  bool dispersion_enabled(const FamilySpec& fam) const;
};

struct SgdConfig : FitControls {
  int max_epochs = 500;
  double rate_k0 = 0.01;
  double rate_k1 = 0.01;
  double rate_tau = 0.75;
  Index mb_rows = 100;
  Index mb_cols = 20;
  double smooth_a1 = 0.1;
  double smooth_a2 = 0.01;

  void validate() const;
};

struct NewtonConfig : FitControls {
  int max_iter = 200;
  double stepsize = 0.2;

  void validate() const;
};

struct AirwlsConfig : FitControls {
  int max_iter = 200;
  /// Fisher-scoring steps per row/column visit.
  int nsteps = 1;
  double stepsize = 1.0;
  /// After each sweep, move to the point with the same linear predictor and
  /// the smallest penalty reachable by `rebalance`. The objective never
  /// increases; the slow drift of alternating solves along those directions
  /// is skipped.
  bool rebalance = true;

  void validate() const;
};

struct FitReport {
  std::string algorithm;
  /// Penalized objective before the identifiability projection.
  double final_objective = 0.0;
  /// Entry 0 is the objective at the initial state, then one per epoch.
  std::vector<double> objective_trace;
  int epochs_run = 0;
  bool converged = false;
  double elapsed_seconds = 0.0;
  std::vector<double> phi_trace;
  std::vector<double> nb_shape_trace;
  Index effective_rank = 0;
  bool rank_deficient = false;
};

struct FitResult {
  FactorizationState state;
  FitReport report;
};

/// k0 / (1 + k0 k1 t)^tau.
double learning_rate(long t, const SgdConfig& cfg);

struct Smoothed {
  Matrix g;
  Matrix h;
};
/// (1 - a1) prev_g + a1 hat_g and (1 - a2) prev_h + a2 hat_h.
Smoothed smooth_update(const Matrix& prev_g, const Matrix& prev_h, const Matrix& hat_g,
                       const Matrix& hat_h, double a1, double a2);

/// (1 - a2^t) / (1 - a1^t); exactly 1 when a1 == a2. t = 0 throws.
double bias_correction(long t, double a1, double a2);

/// Pearson statistic sum over the block's observed entries of
/// w (y - mu)^2 / nu(mu), rescaled to |Omega| and divided by the residual
/// degrees of freedom |Omega| - parameter_count. Throws ConfigError when
/// those are not positive.
double pearson_dispersion(const FactorizationState& state, const ResponseMatrix& data,
                          const CovariateSet& covs, const FamilySpec& fam, const LinkSpec& link,
                          const Minibatch& mb);

/// (1 - rate) * state.phi + rate * pearson_dispersion(...).
double update_dispersion_stochastic(const FactorizationState& state, const ResponseMatrix& data,
                                    const CovariateSet& covs, const FamilySpec& fam,
                                    const LinkSpec& link, const Minibatch& mb, double rate);

/// Moment estimate sum w mu^2 / sum w ((y - mu)^2 - mu) over the block's
/// observed entries. A non-positive denominator, or an estimate above `cap`,
/// yields `cap` (data indistinguishable from Poisson).
double nb_shape_moment(const FactorizationState& state, const ResponseMatrix& data,
                       const CovariateSet& covs, const LinkSpec& link, const Minibatch& mb,
                       double cap);

/// (1 - rate) * state.nb_shape + rate * max(floor, nb_shape_moment(...)).
double update_nb_shape_stochastic(const FactorizationState& state, const ResponseMatrix& data,
                                  const CovariateSet& covs, const LinkSpec& link,
                                  const Minibatch& mb, double rate, double floor,
                                  double cap = 1e8);

/// Sets every unobserved entry of the block in `working` to the current
/// fitted mean. Observed entries are untouched.
void impute_block(const FactorizationState& state, const CovariateSet& covs,
                  const FamilySpec& fam, const LinkSpec& link, ResponseMatrix& working,
                  const Minibatch& mb);

/// Splits a random permutation of 0..count-1 into `blocks` nearly equal
/// parts, each sorted ascending.
std::vector<IndexSet> random_partition(Index count, Index blocks, std::mt19937_64& rng);

/// Algorithm state for block-wise adaptive SGD, exposed so that individual
/// block updates can be driven and inspected.
///
/// Rows and columns are stored grouped by block, so that every minibatch is
/// a contiguous submatrix and the cost of a step does not depend on n or m.
class AsgdStepper {
 public:
  AsgdStepper(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
              const LinkSpec& link, const PenaltyConfig& penalty, const SgdConfig& cfg,
              FactorizationState init);

  /// One block update on column block `s` with a random row block.
  void step(std::size_t s);
  /// One sweep over all column blocks.
  void epoch();

  /// Parameters in the original row and column order.
  const FactorizationState& state() const;
  /// Working copy of the data (imputed values included), original order.
  ResponseMatrix working_data() const;
  long iteration() const { return t_; }
  /// Blocks as sets of original row / column indices.
  const std::vector<IndexSet>& row_blocks() const { return row_blocks_; }
  const std::vector<IndexSet>& col_blocks() const { return col_blocks_; }

 private:
  FamilySpec fam_;
  LinkSpec link_;
  PenaltyConfig penalty_;
  SgdConfig cfg_;
  bool estimate_phi_;
  bool estimate_shape_;
  std::mt19937_64 rng_;
  std::vector<IndexSet> row_blocks_;
  std::vector<IndexSet> col_blocks_;
  // Block-grouped storage: position k holds original row row_order_[k].
  IndexSet row_order_;
  IndexSet col_order_;
  std::vector<IndexSet> row_slots_;
  std::vector<IndexSet> col_slots_;
  CovariateSet covs_;
  FactorizationState state_;
  ResponseMatrix working_;
  Matrix gbar_row_, hbar_row_, gbar_col_, hbar_col_;
  mutable FactorizationState original_;
  mutable bool original_stale_ = true;
  long t_ = 0;
};

/// Diagonal quasi-Newton on the full data.
class NewtonStepper {
 public:
  NewtonStepper(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                const LinkSpec& link, const PenaltyConfig& penalty, const NewtonConfig& cfg,
                FactorizationState init);

  void step();

  const FactorizationState& state() const { return state_; }
  const ResponseMatrix& working_data() const { return working_; }
  long iteration() const { return t_; }

 private:
  CovariateSet covs_;
  FamilySpec fam_;
  LinkSpec link_;
  PenaltyConfig penalty_;
  NewtonConfig cfg_;
  FactorizationState state_;
  ResponseMatrix working_;
  bool estimate_phi_;
  bool estimate_shape_;
  long t_ = 0;
};

/// Alternated row-wise / column-wise penalized Fisher scoring.
class AirwlsStepper {
 public:
  AirwlsStepper(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                const LinkSpec& link, const PenaltyConfig& penalty, const AirwlsConfig& cfg,
                FactorizationState init);

  void step();

  const FactorizationState& state() const { return state_; }
  long iteration() const { return t_; }

 private:
  void update_rows();
  void update_cols();

  CovariateSet covs_;
  FamilySpec fam_;
  LinkSpec link_;
  PenaltyConfig penalty_;
  AirwlsConfig cfg_;
  FactorizationState state_;
  ResponseMatrix working_;
  bool estimate_phi_;
  bool estimate_shape_;
  long t_ = 0;
};

enum class Algorithm { Asgd, Newton, Airwls };

std::string_view algorithm_name(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

/// Algorithm choice together with the settings of each algorithm.
struct FitSettings {
  Algorithm algorithm = Algorithm::Asgd;
  SgdConfig sgd;
  NewtonConfig newton;
  AirwlsConfig airwls;

  /// Controls of the selected algorithm.
  const FitControls& controls() const;
  FitControls& controls();
};

FitResult fit_model(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                    const LinkSpec& link, const PenaltyConfig& penalty,
                    const FitSettings& settings, const FactorizationState& init);

FitResult fit_asgd(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                   const LinkSpec& link, const PenaltyConfig& penalty, const SgdConfig& cfg,
                   const FactorizationState& init);

FitResult fit_newton(const ResponseMatrix& data, const CovariateSet& covs,
                     const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty,
                     const NewtonConfig& cfg, const FactorizationState& init);

FitResult fit_airwls(const ResponseMatrix& data, const CovariateSet& covs,
                     const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty,
                     const AirwlsConfig& cfg, const FactorizationState& init);

}  // namespace gmfkit
