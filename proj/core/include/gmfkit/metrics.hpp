#pragma once

// Out-of-sample accuracy measures relative to a constant train-mean
// baseline.

#include <span>

#include "gmfkit/model.hpp"

namespace gmfkit {

struct EvalResult {
  double rel_log_rmse = 0.0;
  double rel_deviance = 0.0;
  Index n_test = 0;
};

/// sum log((1 + y) / (1 + mu))^2 / sum log((1 + y) / (1 + ybar))^2.
/// Despite the name this is a ratio of squared sums, not of their roots.
/// Throws DegenerateError when the denominator is zero.
double rel_log_rmse(std::span<const double> y, std::span<const double> mu, double ybar);

/// sum D(y, mu) / sum D(y, ybar).
double rel_deviance(std::span<const double> y, std::span<const double> mu, double ybar,
                    const FamilySpec& fam);

/// Mean of the observed entries.
double observed_mean(const ResponseMatrix& data);

/// Both metrics on the listed entries of `truth`, with predictions `mu`
/// (full n x m) and the baseline `ybar`.
EvalResult evaluate(const Matrix& truth, const Matrix& mu,
                    const std::vector<std::pair<Index, Index>>& entries, double ybar,
                    const FamilySpec& fam);

}  // namespace gmfkit
