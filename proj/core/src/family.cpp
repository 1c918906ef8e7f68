#include "gmfkit/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gmfkit/errors.hpp"

namespace gmfkit {

namespace {

constexpr double kBernoulliEps = 1e-10;
// exp() underflows to zero below about -745; keep positive means representable.
constexpr double kPositiveFloor = 1e-300;

[[noreturn]] void domain_fail(std::string_view what, std::string_view name, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << " for " << name << ": " << value;
  throw DomainError(os.str());
}

// y * log(y / mu) with the y -> 0 limit taken analytically.
double xlogx_ratio(double y, double mu) {
  if (y == 0.0) return 0.0;
  return y * std::log(y / mu);
}

}  // namespace

std::string_view family_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Gaussian: return "gaussian";
    case FamilyKind::Gamma: return "gamma";
    case FamilyKind::InverseGaussian: return "inverse_gaussian";
    case FamilyKind::Poisson: return "poisson";
    case FamilyKind::Bernoulli: return "bernoulli";
    case FamilyKind::NegBinomial: return "negbinomial";
  }
  return "unknown";
}

std::string_view link_name(LinkKind kind) {
  switch (kind) {
    case LinkKind::Identity: return "identity";
    case LinkKind::Log: return "log";
    case LinkKind::Logit: return "logit";
    case LinkKind::Inverse: return "inverse";
    case LinkKind::InverseSquared: return "inverse_squared";
  }
  return "unknown";
}

FamilyKind parse_family(std::string_view name) {
  if (name == "gaussian") return FamilyKind::Gaussian;
  if (name == "gamma") return FamilyKind::Gamma;
  if (name == "inverse_gaussian" || name == "invgaussian") return FamilyKind::InverseGaussian;
  if (name == "poisson") return FamilyKind::Poisson;
  if (name == "bernoulli" || name == "binomial") return FamilyKind::Bernoulli;
  if (name == "negbinomial" || name == "nb") return FamilyKind::NegBinomial;
  throw ConfigError("unknown family '" + std::string(name) + "'");
}

LinkKind parse_link(std::string_view name) {
  if (name == "identity") return LinkKind::Identity;
  if (name == "log") return LinkKind::Log;
  if (name == "logit") return LinkKind::Logit;
  if (name == "inverse") return LinkKind::Inverse;
  if (name == "inverse_squared" || name == "1/mu^2") return LinkKind::InverseSquared;
  throw ConfigError("unknown link '" + std::string(name) + "'");
}

LinkKind canonical_link(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Gaussian: return LinkKind::Identity;
    case FamilyKind::Gamma: return LinkKind::Inverse;
    case FamilyKind::InverseGaussian: return LinkKind::InverseSquared;
    case FamilyKind::Poisson: return LinkKind::Log;
    case FamilyKind::Bernoulli: return LinkKind::Logit;
    case FamilyKind::NegBinomial: return LinkKind::Log;
  }
  return LinkKind::Identity;
}

const std::vector<std::pair<FamilyKind, LinkKind>>& supported_pairs() {
  static const std::vector<std::pair<FamilyKind, LinkKind>> pairs = {
      {FamilyKind::Gaussian, LinkKind::Identity},
      {FamilyKind::Gaussian, LinkKind::Log},
      {FamilyKind::Gamma, LinkKind::Inverse},
      {FamilyKind::Gamma, LinkKind::Log},
      {FamilyKind::InverseGaussian, LinkKind::InverseSquared},
      {FamilyKind::InverseGaussian, LinkKind::Log},
      {FamilyKind::Poisson, LinkKind::Log},
      {FamilyKind::Bernoulli, LinkKind::Logit},
      {FamilyKind::NegBinomial, LinkKind::Log},
  };
  return pairs;
}

bool is_supported(FamilyKind family, LinkKind link) {
  const auto& pairs = supported_pairs();
  return std::find(pairs.begin(), pairs.end(), std::make_pair(family, link)) != pairs.end();
}

bool has_free_dispersion(FamilyKind kind) {
  return kind == FamilyKind::Gaussian || kind == FamilyKind::Gamma ||
         kind == FamilyKind::InverseGaussian;
}

void check_mean(const FamilySpec& fam, double mu) {
  const auto name = family_name(fam.kind);
  if (!std::isfinite(mu)) domain_fail("non-finite mean", name, mu);
  switch (fam.kind) {
    case FamilyKind::Gaussian: return;
    case FamilyKind::Bernoulli:
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("mean outside (0, 1)", name, mu);
      return;
    case FamilyKind::NegBinomial:
      if (!(fam.nb_shape > 0.0)) domain_fail("non-positive shape", name, fam.nb_shape);
      [[fallthrough]];
    default:
      if (!(mu > 0.0)) domain_fail("non-positive mean", name, mu);
  }
}

void check_response(const FamilySpec& fam, double y) {
  const auto name = family_name(fam.kind);
  if (!std::isfinite(y)) domain_fail("non-finite response", name, y);
  switch (fam.kind) {
    case FamilyKind::Gaussian: return;
    case FamilyKind::Gamma:
    case FamilyKind::InverseGaussian:
      if (!(y > 0.0)) domain_fail("non-positive response", name, y);
      return;
    case FamilyKind::Poisson:
    case FamilyKind::NegBinomial:
      if (y < 0.0) domain_fail("negative response", name, y);
      return;
    case FamilyKind::Bernoulli:
      if (y < 0.0 || y > 1.0) domain_fail("response outside [0, 1]", name, y);
      return;
  }
}

double clamp_mean(const FamilySpec& fam, double mu) {
  switch (fam.kind) {
    case FamilyKind::Gaussian: return mu;
    case FamilyKind::Bernoulli: return std::clamp(mu, kBernoulliEps, 1.0 - kBernoulliEps);
    default: return mu > 0.0 ? std::max(mu, kPositiveFloor) : mu;
  }
}

double variance(const FamilySpec& fam, double mu) {
  check_mean(fam, mu);
  switch (fam.kind) {
    case FamilyKind::Gaussian: return 1.0;
    case FamilyKind::Gamma: return mu * mu;
    case FamilyKind::InverseGaussian: return mu * mu * mu;
    case FamilyKind::Poisson: return mu;
    case FamilyKind::Bernoulli: return mu * (1.0 - mu);
    case FamilyKind::NegBinomial: return mu * (1.0 + mu / fam.nb_shape);
  }
  return 1.0;
}

double variance_deriv(const FamilySpec& fam, double mu) {
  check_mean(fam, mu);
  switch (fam.kind) {
    case FamilyKind::Gaussian: return 0.0;
    case FamilyKind::Gamma: return 2.0 * mu;
    case FamilyKind::InverseGaussian: return 3.0 * mu * mu;
    case FamilyKind::Poisson: return 1.0;
    case FamilyKind::Bernoulli: return 1.0 - 2.0 * mu;
    case FamilyKind::NegBinomial: return 1.0 + 2.0 * mu / fam.nb_shape;
  }
  return 0.0;
}

double unit_deviance(const FamilySpec& fam, double y, double mu, double w) {
  if (!(w > 0.0)) domain_fail("non-positive weight", family_name(fam.kind), w);
  check_response(fam, y);
  if (fam.kind == FamilyKind::Bernoulli) {
    if (!(mu >= 0.0 && mu <= 1.0) || std::isnan(mu))
      domain_fail("mean outside [0, 1]", family_name(fam.kind), mu);
    mu = std::clamp(mu, kBernoulliEps, 1.0 - kBernoulliEps);
  }
  check_mean(fam, mu);
  switch (fam.kind) {
    case FamilyKind::Gaussian: {
      const double r = y - mu;
      return w * r * r;
    }
    case FamilyKind::Gamma:
      return 2.0 * w * ((y - mu) / mu - std::log(y / mu));
    case FamilyKind::InverseGaussian: {
      const double r = y - mu;
      return w * r * r / (y * mu * mu);
    }
    case FamilyKind::Poisson:
      return 2.0 * w * (xlogx_ratio(y, mu) - (y - mu));
    case FamilyKind::Bernoulli:
      return 2.0 * w * (xlogx_ratio(y, mu) + xlogx_ratio(1.0 - y, 1.0 - mu));
    case FamilyKind::NegBinomial: {
      const double a = fam.nb_shape;
      // (y + a) log((y + a) / (mu + a)) via log1p so large shapes keep precision.
      const double tail = (y + a) * std::log1p((y - mu) / (mu + a));
      return 2.0 * w * (xlogx_ratio(y, mu) - tail);
    }
  }
  return 0.0;
}

double link_eval(const LinkSpec& link, double mu) {
  const auto name = link_name(link.kind);
  switch (link.kind) {
    case LinkKind::Identity: return mu;
    case LinkKind::Log:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return std::log(mu);
    case LinkKind::Logit:
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("argument outside (0, 1)", name, mu);
      return std::log(mu / (1.0 - mu));
    case LinkKind::Inverse:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return 1.0 / mu;
    case LinkKind::InverseSquared:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return 1.0 / (mu * mu);
  }
  return mu;
}

double link_inverse(const LinkSpec& link, double eta) {
  const auto name = link_name(link.kind);
  if (std::isnan(eta)) domain_fail("NaN predictor", name, eta);
  switch (link.kind) {
    case LinkKind::Identity: return eta;
    case LinkKind::Log: return std::exp(eta);
    case LinkKind::Logit:
      if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
      return std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::Inverse:
      if (!(eta > 0.0)) domain_fail("non-positive predictor", name, eta);
      return 1.0 / eta;
    case LinkKind::InverseSquared:
      if (!(eta > 0.0)) domain_fail("non-positive predictor", name, eta);
      return 1.0 / std::sqrt(eta);
  }
  return eta;
}

double link_deriv1(const LinkSpec& link, double mu) {
  const auto name = link_name(link.kind);
  switch (link.kind) {
    case LinkKind::Identity: return 1.0;
    case LinkKind::Log:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return 1.0 / mu;
    case LinkKind::Logit:
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("argument outside (0, 1)", name, mu);
      return 1.0 / (mu * (1.0 - mu));
    case LinkKind::Inverse:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return -1.0 / (mu * mu);
    case LinkKind::InverseSquared:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return -2.0 / (mu * mu * mu);
  }
  return 1.0;
}

double link_deriv2(const LinkSpec& link, double mu) {
  const auto name = link_name(link.kind);
  switch (link.kind) {
    case LinkKind::Identity: return 0.0;
    case LinkKind::Log:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return -1.0 / (mu * mu);
    case LinkKind::Logit: {
      if (!(mu > 0.0 && mu < 1.0)) domain_fail("argument outside (0, 1)", name, mu);
      const double v = mu * (1.0 - mu);
      return (2.0 * mu - 1.0) / (v * v);
    }
    case LinkKind::Inverse:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return 2.0 / (mu * mu * mu);
    case LinkKind::InverseSquared:
      if (!(mu > 0.0)) domain_fail("non-positive argument", name, mu);
      return 6.0 / (mu * mu * mu * mu);
  }
  return 0.0;
}

double dot_d(const FamilySpec& fam, const LinkSpec& link, double y, double mu, double w,
             double phi) {
  if (!(phi > 0.0)) domain_fail("non-positive dispersion", family_name(fam.kind), phi);
  if (!(w > 0.0)) domain_fail("non-positive weight", family_name(fam.kind), w);
  check_response(fam, y);
  return -w * (y - mu) / (phi * variance(fam, mu) * link_deriv1(link, mu));
}

double ddot_d(const FamilySpec& fam, const LinkSpec& link, double y, double mu, double w,
              double phi, HessianForm form) {
  if (!(phi > 0.0)) domain_fail("non-positive dispersion", family_name(fam.kind), phi);
  if (!(w > 0.0)) domain_fail("non-positive weight", family_name(fam.kind), w);
  check_response(fam, y);
  const double nu = variance(fam, mu);
  const double g1 = link_deriv1(link, mu);
  double alpha = 1.0;
  if (form == HessianForm::Observed) {
    alpha = 1.0 + (y - mu) * (variance_deriv(fam, mu) / nu + link_deriv2(link, mu) / g1);
  }
  return w * alpha / (phi * nu * g1 * g1);
}

double saturated_loglik(const FamilySpec& fam, double y, double w, double phi) {
  constexpr double kLog2Pi = 1.8378770664093453;
  check_response(fam, y);
  switch (fam.kind) {
    case FamilyKind::Gaussian:
      return -0.5 * (kLog2Pi + std::log(phi / w));
    case FamilyKind::Gamma: {
      const double k = w / phi;
      return k * std::log(k) - k - std::log(y) - std::lgamma(k);
    }
    case FamilyKind::InverseGaussian:
      return -0.5 * (kLog2Pi + std::log(phi * y * y * y / w));
    case FamilyKind::Poisson:
      return w * ((y > 0.0 ? y * std::log(y) : 0.0) - y - std::lgamma(y + 1.0));
    case FamilyKind::Bernoulli:
      return w * ((y > 0.0 ? y * std::log(y) : 0.0) +
                  (y < 1.0 ? (1.0 - y) * std::log(1.0 - y) : 0.0));
    case FamilyKind::NegBinomial: {
      const double a = fam.nb_shape;
      const double body = std::lgamma(y + a) - std::lgamma(a) - std::lgamma(y + 1.0) +
                          a * std::log(a / (y + a)) +
                          (y > 0.0 ? y * std::log(y / (y + a)) : 0.0);
      return w * body;
    }
  }
  return 0.0;
}

}  // namespace gmfkit
