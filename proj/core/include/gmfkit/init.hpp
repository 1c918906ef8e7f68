#pragma once

// Starting values: per-column / per-row GLM fits followed by an SVD of the
// null-model residuals (GlmSvd), or the same pipeline with ordinary least
// squares on a link-transformed response (OlsSvd).

#include <cstdint>
#include <string_view>

#include "gmfkit/model.hpp"

namespace gmfkit {

enum class InitKind { GlmSvd, OlsSvd };
enum class ResidualKind { Deviance, Pearson };

struct InitMethod {
  InitKind kind = InitKind::OlsSvd;
  ResidualKind residual = ResidualKind::Deviance;
  /// Perturbation used by the transformed links. Unset: 0.1 for log,
  /// 0.01 for logit, 1e-3 for the inverse links.
  double link_epsilon = 0.0;
  std::uint64_t seed = 0;
  /// Negative binomial shape cap when the moment estimate is degenerate.
  double nb_shape_max = 1e8;
  double nb_shape_floor = 1e-4;
};

std::string_view init_name(InitKind kind);
InitKind parse_init(std::string_view name);

struct InitResult {
  FactorizationState state;
  /// Columns or rows whose GLM fit failed and were filled by least squares.
  Index fallbacks = 0;
};

/// g_eps(y): log(y + eps), logit(clamp(y, eps, 1 - eps)), y, or the inverse
/// links applied to max(y, eps).
double perturbed_link(const LinkSpec& link, double y, double eps);
double default_link_epsilon(const LinkSpec& link);

/// Residuals of y after least squares on X (per column, observed rows only)
/// and then on Z (per row). Unobserved entries are zero in the result.
/// The coefficients are written to b (m x p) and gamma (n x q) when given.
Matrix covariate_residuals(const Matrix& y, const Mask& mask, const CovariateSet& covs,
                           Matrix* b = nullptr, Matrix* gamma = nullptr);

InitResult init_glm_svd(const ResponseMatrix& data, const CovariateSet& covs,
                        const FamilySpec& fam, const LinkSpec& link, Index d,
                        const InitMethod& method = {});

InitResult init_ols_svd(const ResponseMatrix& data, const CovariateSet& covs,
                        const FamilySpec& fam, const LinkSpec& link, Index d,
                        const InitMethod& method = {});

/// Dispatch on method.kind.
InitResult initialize(const ResponseMatrix& data, const CovariateSet& covs,
                      const FamilySpec& fam, const LinkSpec& link, Index d,
                      const InitMethod& method = {});

}  // namespace gmfkit
