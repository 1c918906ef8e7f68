#pragma once

// Rank selection: information criteria, repeated-holdout cross-validation of
// the out-of-sample deviance, and the eigenvalue scree of log1p OLS
// residuals.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gmfkit/init.hpp"
#include "gmfkit/model.hpp"
#include "gmfkit/optim.hpp"

namespace gmfkit {

using EntryList = std::vector<std::pair<Index, Index>>;

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
  /// -2 log-likelihood: D / phi minus twice the saturated log-likelihood.
  double neg2_loglik = 0.0;
  double deviance = 0.0;
  std::int64_t k = 0;
};

/// AIC = -2 l + 2 k, BIC = -2 l + k log |Omega|, where -2 l adds the
/// family's log-partition term to D / phi so that criteria stay comparable
/// when phi or the negative binomial shape differ between fits.
InformationCriteria information_criteria(const FactorizationState& state,
                                         const ResponseMatrix& data, const CovariateSet& covs,
                                         const FamilySpec& fam, const LinkSpec& link);

struct Holdout {
  ResponseMatrix train;
  /// Held-out entries, column-major order.
  EntryList test;
};

/// Masks floor(fraction |Omega|) observed entries, drawn uniformly. Draws
/// that leave a row or column with no observed entry are rejected and
/// redrawn, at most 100 times.
Holdout holdout_mask(const ResponseMatrix& data, double fraction, std::uint64_t seed);

struct CvOptions {
  int folds = 5;
  double holdout_fraction = 0.3;
  std::uint64_t seed = 0;
  FitSettings fit;
  PenaltyConfig penalty;
  InitMethod init;
  /// Start rank d from the fit at the previous rank, padded with small
  /// random columns. Off: initialize every cell from scratch.
  bool warm_start = true;
  double pad_scale = 1e-3;
  /// Also fit every rank on the full data and compute AIC / BIC.
  bool information_criteria = false;
  /// Number of scree eigenvalues to report; 0 skips the scree.
  Index scree_max_rank = 0;
};

struct CvCell {
  Index rank = 0;
  int fold = 0;
  bool failed = false;
  std::string error;
  double deviance = 0.0;
  double rel_deviance = 0.0;
  long epochs = 0;
  bool converged = false;
};

struct RankSelectionReport {
  std::vector<Index> ranks;
  int folds = 0;
  std::vector<double> aic;
  std::vector<double> bic;
  /// [rank][fold]; NaN for failed cells.
  std::vector<std::vector<double>> cv_deviance;
  /// Held-out deviance over the deviance of the train-mean baseline.
  std::vector<std::vector<double>> cv_rel_deviance;
  std::vector<double> cv_mean;
  std::vector<double> cv_rel_mean;
  std::vector<CvCell> cells;
  std::vector<double> scree_eigenvalues;
  bool scree_ambiguous = false;
  bool scree_warning = false;
  std::map<std::string, Index> chosen;
  int failed_cells = 0;
};

RankSelectionReport cv_rank_select(const ResponseMatrix& data, const CovariateSet& covs,
                                   const FamilySpec& fam, const LinkSpec& link,
                                   std::vector<Index> ranks, const CvOptions& opts);

/// Residuals of log1p(Y) after least squares on the covariates (rows on X,
/// then columns on Z). Unobserved entries are skipped in the fits and set
/// to zero in the residual.
Matrix log_residuals(const ResponseMatrix& data, const CovariateSet& covs);

/// Leading max_rank squared singular values of log_residuals, descending.
std::vector<double> scree_eigenvalues(const ResponseMatrix& data, const CovariateSet& covs,
                                      Index max_rank);

/// Leading k left singular vectors of log_residuals scaled by the singular
/// values (the row scores matching the scree).
Matrix scree_scores(const ResponseMatrix& data, const CovariateSet& covs, Index k);

struct ElbowPick {
  Index rank = 1;
  /// No distinguished gap: every ratio equals the first.
  bool ambiguous = false;
  /// Fewer than two eigenvalues.
  bool warning = false;
};

/// argmax_k lambda_k / lambda_{k+1} (1-based, first maximum on ties).
ElbowPick elbow_pick(const std::vector<double>& eigenvalues);

}  // namespace gmfkit
