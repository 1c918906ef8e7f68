#pragma once

// Single-response GLM fitting by iteratively reweighted least squares, used
// by the initializers.

#include "gmfkit/model.hpp"

namespace gmfkit {

struct GlmOptions {
  int max_iter = 50;
  double tol = 1e-8;
  /// Added to the diagonal of the weighted normal equations.
  double ridge = 0.0;
};

struct GlmFit {
  Vector coef;
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
};

/// Fits g(mu) = offset + x * coef over the entries with include(i) true.
/// Throws SingularSystemError when the weighted normal equations cannot be
/// factorized and DomainError when no valid step can be found.
GlmFit fit_glm(const Matrix& x, const Vector& y, const Vector& weights, const Vector& offset,
               const Eigen::Array<bool, Eigen::Dynamic, 1>& include, const FamilySpec& fam,
               const LinkSpec& link, const GlmOptions& opts = {});

/// Starting mean for IRLS, inside the family's mean domain.
double glm_start_mean(const FamilySpec& fam, double y);

}  // namespace gmfkit
