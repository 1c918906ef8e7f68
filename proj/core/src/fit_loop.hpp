#pragma once

// Shared outer loop for the three fitting algorithms (internal header).

#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gmfkit/optim.hpp"

namespace gmfkit::detail {

/// Penalized objective on the observed entries, exact for small data and on
/// a fixed random subsample of entries otherwise.
class ObjectiveMonitor {
 public:
  ObjectiveMonitor(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                   const LinkSpec& link, const PenaltyConfig& penalty, Index sample_size,
                   std::uint64_t seed);

  double operator()(const FactorizationState& state) const;

 private:
  const ResponseMatrix& data_;
  const CovariateSet& covs_;
  FamilySpec fam_;
  LinkSpec link_;
  PenaltyConfig penalty_;
  bool exact_;
  std::vector<std::pair<Index, Index>> entries_;
};

bool all_finite(const FactorizationState& state);

/// Dispersion and negative binomial shape estimates from precomputed block
/// means (see pearson_dispersion and nb_shape_moment).
double pearson_from_means(const FactorizationState& state, const ResponseMatrix& data,
                          const FamilySpec& fam, const Minibatch& mb, const Matrix& mu);
double nb_moment_from_means(const ResponseMatrix& data, const Minibatch& mb, const Matrix& mu,
                            double cap);

/// Fill for unobserved entries: the fitted means at `state`.
ResponseMatrix make_working_copy(const ResponseMatrix& data, const FactorizationState& state,
                                 const CovariateSet& covs, const FamilySpec& fam,
                                 const LinkSpec& link);

/// Runs `advance()` up to `max_rounds` times, recording the objective after
/// each round and stopping after two consecutive relative changes below
/// `ctl.tol`. `current()` returns the stepper's state.
template <typename Advance, typename Current>
FitResult run_fit(const std::string& name, const ResponseMatrix& data, const CovariateSet& covs,
                  const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty,
                  const FitControls& ctl, int max_rounds, Advance&& advance,
                  Current&& current) {
  const auto start = std::chrono::steady_clock::now();
  ObjectiveMonitor monitor(data, covs, fam, link, penalty, ctl.objective_sample, ctl.seed);

  FitResult result;
  FitReport& rep = result.report;
  rep.algorithm = name;

  FactorizationState last = current();
  double prev = 0.0;
  try {
    prev = monitor(last);
  } catch (const DomainError& e) {
    throw DivergenceError(std::string("objective undefined at the initial state: ") + e.what(),
                          last);
  }
  if (!std::isfinite(prev)) throw DivergenceError("non-finite objective at the initial state", last);
  rep.objective_trace.push_back(prev);
  rep.phi_trace.push_back(last.phi);
  rep.nb_shape_trace.push_back(last.nb_shape);

  int small_changes = 0;
  for (int round = 1; round <= max_rounds; ++round) {
    double value = 0.0;
    try {
      advance();
      value = monitor(current());
    } catch (const DomainError& e) {
      throw DivergenceError(std::string("fit left the model domain: ") + e.what(), last);
    }
    if (!std::isfinite(value) || !all_finite(current()))
      throw DivergenceError("objective is no longer finite", last);
    last = current();
    rep.objective_trace.push_back(value);
    rep.phi_trace.push_back(last.phi);
    rep.nb_shape_trace.push_back(last.nb_shape);
    rep.epochs_run = round;

    const double rel = std::abs(value - prev) / std::max(std::abs(prev), 1e-300);
    small_changes = rel < ctl.tol ? small_changes + 1 : 0;
    prev = value;
    if (small_changes >= 2) {
      rep.converged = true;
      break;
    }
  }

  rep.final_objective = penalized_objective(last, data, covs, fam, link, penalty);
  if (ctl.project) {
    Projection proj = project_constraints(last, covs, ctl.identify);
    result.state = std::move(proj.state);
    rep.effective_rank = proj.effective_rank;
    rep.rank_deficient = proj.rank_deficient;
  } else {
    result.state = std::move(last);
    rep.effective_rank = result.state.rank();
  }
  rep.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace gmfkit::detail
