#pragma once

// Exponential-dispersion families and link functions.
//
// Everything is expressed through the mean: variance function nu(mu), link
// g(mu) and its first two derivatives, and the unit deviance D(y, mu). The
// per-entry derivatives of the negative log-likelihood with respect to the
// linear predictor (dot_d, ddot_d) are built on top of those.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gmfkit {

enum class FamilyKind { Gaussian, Gamma, InverseGaussian, Poisson, Bernoulli, NegBinomial };

enum class LinkKind { Identity, Log, Logit, Inverse, InverseSquared };

struct FamilySpec {
  FamilySpec(FamilyKind k = FamilyKind::Poisson, double shape = 1.0)  // NOLINT
      : kind(k), nb_shape(shape) {}

  FamilyKind kind;
  /// Negative binomial shape (alpha). Ignored for other families.
  double nb_shape;
};

struct LinkSpec {
  LinkSpec(LinkKind k = LinkKind::Log) : kind(k) {}  // NOLINT
  LinkKind kind;
};

enum class HessianForm { Fisher, Observed };

std::string_view family_name(FamilyKind kind);
std::string_view link_name(LinkKind kind);
FamilyKind parse_family(std::string_view name);
LinkKind parse_link(std::string_view name);

/// Canonical link of a family (NegBinomial uses log).
LinkKind canonical_link(FamilyKind kind);

/// Family/link pairs supported throughout the library.
const std::vector<std::pair<FamilyKind, LinkKind>>& supported_pairs();
bool is_supported(FamilyKind family, LinkKind link);

/// True for families whose dispersion is not fixed at one.
bool has_free_dispersion(FamilyKind kind);

/// Throws DomainError unless `mu` is inside the family's mean domain.
void check_mean(const FamilySpec& fam, double mu);
/// Throws DomainError unless `y` is inside the family's support. Poisson,
/// negative binomial and Bernoulli accept non-integer values so that imputed
/// entries (y = mu) remain valid.
void check_response(const FamilySpec& fam, double y);

/// Clamp a mean produced by an inverse link into the open mean domain.
/// Only used on derived quantities, never on stored parameters.
double clamp_mean(const FamilySpec& fam, double mu);

double variance(const FamilySpec& fam, double mu);
/// d nu / d mu.
double variance_deriv(const FamilySpec& fam, double mu);

/// D(y, mu) = 2 w * (rescaled deviance). The y log(y/mu) terms vanish at
/// y = 0 by their analytic limit.
double unit_deviance(const FamilySpec& fam, double y, double mu, double w = 1.0);

double link_eval(const LinkSpec& link, double mu);
double link_inverse(const LinkSpec& link, double eta);
double link_deriv1(const LinkSpec& link, double mu);
double link_deriv2(const LinkSpec& link, double mu);

/// First derivative of the per-entry negative log-likelihood with respect to
/// eta: -w (y - mu) / (phi nu(mu) g'(mu)).
double dot_d(const FamilySpec& fam, const LinkSpec& link, double y, double mu, double w,
             double phi);

/// Second derivative with respect to eta. The Fisher form drops the
/// (y - mu) correction and is strictly positive.
double ddot_d(const FamilySpec& fam, const LinkSpec& link, double y, double mu, double w,
              double phi, HessianForm form = HessianForm::Fisher);

/// log f(y; mu = y, phi), the saturated log-density, used to turn deviances
/// into full log-likelihoods.
double saturated_loglik(const FamilySpec& fam, double y, double w, double phi);

}  // namespace gmfkit
