#pragma once

// Projection onto the identified parameterization.
//
// Constraint (A): X^T Gamma = 0, X^T U = 0, Z^T V = 0. Then one of
//   B1  U^T U diagonal (decreasing), V^T V = I, first nonzero of each V
//       column positive;
//   B2  U^T U = I, V^T V diagonal (decreasing), first nonzero of each U
//       column positive;
//   B3  centered covariance of U is I, V lower triangular with positive
//       diagonal.
// The linear predictor X B^T + Gamma Z^T + U V^T is unchanged.

#include <string_view>

#include "gmfkit/model.hpp"

namespace gmfkit {

enum class IdentifiabilityMode { B1, B2, B3 };

std::string_view mode_name(IdentifiabilityMode mode);
IdentifiabilityMode parse_mode(std::string_view name);

struct Projection {
  FactorizationState state;
  /// Number of singular values (B1/B2) or covariance eigenvalues (B3) above
  /// the numerical threshold.
  Index effective_rank = 0;
  bool rank_deficient = false;
};

Projection project_constraints(const FactorizationState& state, const CovariateSet& covs,
                               IdentifiabilityMode mode);

/// Same linear predictor, smaller ridge penalty: sweeps the covariate spans
/// out of Gamma, U and V and splits U V^T as P S^(1/2) c, Q S^(1/2) / c with
/// the c that minimizes the U and V penalty terms. Returns `state` unchanged
/// when the candidate's penalty is not lower.
FactorizationState rebalance(const FactorizationState& state, const CovariateSet& covs,
                             const PenaltyConfig& penalty);

struct ConstraintReport {
  double xt_gamma = 0.0;  // max |X^T Gamma|
  double xt_u = 0.0;      // max |X^T U|
  double zt_v = 0.0;      // max |Z^T V|
  /// B1: max |V^T V - I| and off-diagonal |U^T U|; B2 mirrored; B3:
  /// max |Var(U) - I|.
  double orthogonality = 0.0;
  /// B3: max |entry above the diagonal| in the top d x d block of V.
  double triangularity = 0.0;
  bool signs_ok = true;
  /// B1/B2: diagonal of U^T U (resp. V^T V) non-increasing.
  bool order_ok = true;

  double max_violation() const;
};

ConstraintReport check_constraints(const FactorizationState& state, const CovariateSet& covs,
                                   IdentifiabilityMode mode);

}  // namespace gmfkit
