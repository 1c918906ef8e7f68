#pragma once

// Reference implementations used by the tests. They are written directly
// from the family formulas with plain loops and share no code with the
// library beyond its data containers.

#include <cstdint>
#include <vector>

#include "gmfkit/model.hpp"

namespace oracle {

using gmfkit::CovariateSet;
using gmfkit::FactorizationState;
using gmfkit::FamilyKind;
using gmfkit::FamilySpec;
using gmfkit::Index;
using gmfkit::LinkKind;
using gmfkit::LinkSpec;
using gmfkit::Matrix;
using gmfkit::PenaltyConfig;
using gmfkit::ResponseMatrix;

double inverse_link(LinkKind link, double eta);

/// Unit deviance from the closed forms (twice the log-likelihood gap to the
/// saturated model).
double unit_deviance(FamilyKind family, double y, double mu, double nb_shape = 1.0);

/// Negative binomial log-probability, used to check the deviance against a
/// likelihood difference.
double nb_logpmf(double y, double mu, double shape);
double poisson_logpmf(double y, double mu);

/// sum_{observed} w D / (2 phi) + sum_blocks lambda_k / 2 ||block||^2.
double objective(const FactorizationState& s, const ResponseMatrix& data, const CovariateSet& covs,
                 const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty);

struct Instance {
  ResponseMatrix data;
  CovariateSet covs;
  FactorizationState state;
};

/// Random parameters with means safely inside the family's domain, and a
/// response drawn near those means. The first column of X is an intercept;
/// Z has no intercept column. `missing` is the fraction of masked entries.
Instance random_instance(const FamilySpec& fam, const LinkSpec& link, Index n, Index m, Index d,
                         Index p, Index q, double missing, std::uint64_t seed);

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by
/// within-cluster sum of squares.
std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 20);

/// Fraction of matching labels after the best relabeling of `pred`.
double permutation_accuracy(const std::vector<int>& truth, const std::vector<int>& pred, int k);

}  // namespace oracle
