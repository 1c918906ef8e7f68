#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gmfkit/errors.hpp"
#include "gmfkit/family.hpp"
#include "oracles.hpp"

using namespace gmfkit;

TEST(Variance, ClosedForms) {
  EXPECT_DOUBLE_EQ(variance(FamilyKind::Poisson, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(variance(FamilyKind::Gaussian, -7.0), 1.0);
  EXPECT_DOUBLE_EQ(variance(FamilySpec(FamilyKind::NegBinomial, 2.0), 2.0), 4.0);
  EXPECT_DOUBLE_EQ(variance(FamilyKind::Bernoulli, 0.25), 0.1875);
  EXPECT_DOUBLE_EQ(variance(FamilyKind::Gamma, 3.0), 9.0);
  EXPECT_DOUBLE_EQ(variance(FamilyKind::InverseGaussian, 2.0), 8.0);
}

TEST(Variance, OutsideMeanDomainThrows) {
  EXPECT_THROW(variance(FamilyKind::Poisson, -1.0), DomainError);
  EXPECT_THROW(variance(FamilyKind::Bernoulli, 1.5), DomainError);
  EXPECT_THROW(variance(FamilyKind::Gamma, 0.0), DomainError);
}

TEST(Variance, DerivativeMatchesFiniteDifference) {
  const double h = 1e-6;
  for (FamilySpec fam : {FamilySpec(FamilyKind::Poisson), FamilySpec(FamilyKind::Gamma),
                         FamilySpec(FamilyKind::InverseGaussian),
                         FamilySpec(FamilyKind::NegBinomial, 3.0),
                         FamilySpec(FamilyKind::Bernoulli)}) {
    const double mu = 0.3;
    const double fd = (variance(fam, mu + h) - variance(fam, mu - h)) / (2 * h);
    EXPECT_NEAR(variance_deriv(fam, mu), fd, 1e-6) << family_name(fam.kind);
  }
}

TEST(UnitDeviance, PoissonValues) {
  EXPECT_DOUBLE_EQ(unit_deviance(FamilyKind::Poisson, 3.0, 3.0), 0.0);
  EXPECT_NEAR(unit_deviance(FamilyKind::Poisson, 0.0, 1.5), 3.0, 1e-14);
  EXPECT_NEAR(unit_deviance(FamilyKind::Poisson, 2.0, 1.0), 2.0 * (2.0 * std::log(2.0) - 1.0),
              1e-14);
  EXPECT_NEAR(unit_deviance(FamilyKind::Poisson, 2.0, 1.0), 0.772589, 1e-6);
}

TEST(UnitDeviance, WeightScales) {
  EXPECT_NEAR(unit_deviance(FamilyKind::Poisson, 2.0, 1.0, 3.0),
              3.0 * unit_deviance(FamilyKind::Poisson, 2.0, 1.0), 1e-14);
}

TEST(UnitDeviance, MatchesOracleForEveryFamily) {
  struct Case {
    FamilySpec fam;
    double y;
    double mu;
  };
  const Case cases[] = {
      {FamilyKind::Gaussian, -1.3, 0.4},       {FamilyKind::Gamma, 2.5, 1.1},
      {FamilyKind::InverseGaussian, 0.7, 1.9}, {FamilyKind::Poisson, 4.0, 2.2},
      {FamilyKind::Poisson, 0.0, 0.3},         {FamilyKind::Bernoulli, 1.0, 0.8},
      {FamilyKind::Bernoulli, 0.0, 0.35},      {{FamilyKind::NegBinomial, 2.0}, 5.0, 1.5},
      {{FamilyKind::NegBinomial, 0.5}, 0.0, 3.0},
  };
  for (const Case& c : cases) {
    const double want = oracle::unit_deviance(c.fam.kind, c.y, c.mu, c.fam.nb_shape);
    EXPECT_NEAR(unit_deviance(c.fam, c.y, c.mu), want, 1e-12 * std::max(1.0, want))
        << family_name(c.fam.kind) << " y=" << c.y << " mu=" << c.mu;
  }
}

TEST(UnitDeviance, NegBinomialIsLikelihoodGap) {
  const double alpha = 1.7;
  for (double y : {0.0, 1.0, 4.0, 12.0}) {
    for (double mu : {0.2, 2.0, 9.0}) {
      const double gap = 2.0 * (oracle::nb_logpmf(y, y, alpha) - oracle::nb_logpmf(y, mu, alpha));
      EXPECT_NEAR(unit_deviance(FamilySpec(FamilyKind::NegBinomial, alpha), y, mu), gap, 1e-10);
    }
  }
}

TEST(UnitDeviance, NonNegativeAndZeroAtMean) {
  for (FamilySpec fam : {FamilySpec(FamilyKind::Gaussian), FamilySpec(FamilyKind::Gamma),
                         FamilySpec(FamilyKind::Poisson), FamilySpec(FamilyKind::NegBinomial, 2.0),
                         FamilySpec(FamilyKind::InverseGaussian)}) {
    for (double y : {0.5, 1.0, 3.0}) {
      EXPECT_NEAR(unit_deviance(fam, y, y), 0.0, 1e-15);
      for (double mu : {0.25, 2.0, 6.0}) EXPECT_GE(unit_deviance(fam, y, mu), 0.0);
    }
  }
}

TEST(Link, Values) {
  EXPECT_DOUBLE_EQ(link_deriv1(LinkKind::Log, 4.0), 0.25);
  EXPECT_DOUBLE_EQ(link_deriv2(LinkKind::Identity, 123.0), 0.0);
  EXPECT_DOUBLE_EQ(link_inverse(LinkKind::Logit, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(link_eval(LinkKind::Inverse, 4.0), 0.25);
  EXPECT_DOUBLE_EQ(link_eval(LinkKind::InverseSquared, 2.0), 0.25);
}

TEST(Link, InverseRoundTrip) {
  const struct {
    LinkKind link;
    double mu;
  } cases[] = {{LinkKind::Identity, -2.5}, {LinkKind::Log, 3.7},     {LinkKind::Logit, 0.13},
               {LinkKind::Inverse, 0.8},   {LinkKind::InverseSquared, 1.6}};
  for (const auto& c : cases) {
    EXPECT_NEAR(link_inverse(c.link, link_eval(c.link, c.mu)), c.mu, 1e-13) << link_name(c.link);
    EXPECT_NEAR(oracle::inverse_link(c.link, link_eval(c.link, c.mu)), c.mu, 1e-13);
  }
}

TEST(Link, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (LinkKind link : {LinkKind::Identity, LinkKind::Log, LinkKind::Logit, LinkKind::Inverse,
                        LinkKind::InverseSquared}) {
    const double mu = 0.4;
    const double d1 = (link_eval(link, mu + h) - link_eval(link, mu - h)) / (2 * h);
    const double d2 = (link_deriv1(link, mu + h) - link_deriv1(link, mu - h)) / (2 * h);
    EXPECT_NEAR(link_deriv1(link, mu), d1, 1e-6 * std::max(1.0, std::abs(d1))) << link_name(link);
    EXPECT_NEAR(link_deriv2(link, mu), d2, 1e-5 * std::max(1.0, std::abs(d2))) << link_name(link);
  }
}

TEST(Link, LogDomain) { EXPECT_THROW(link_eval(LinkKind::Log, -1.0), DomainError); }

TEST(DotD, Values) {
  const LinkSpec log(LinkKind::Log);
  const LinkSpec id(LinkKind::Identity);
  // Derivative of the negative log-likelihood, so the sign is flipped.
  EXPECT_DOUBLE_EQ(dot_d(FamilyKind::Poisson, log, 3.0, 1.0, 1.0, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(dot_d(FamilyKind::Gaussian, id, 5.0, 2.0, 2.0, 1.0), -6.0);
  EXPECT_DOUBLE_EQ(dot_d(FamilyKind::Gamma, log, 2.0, 2.0, 1.0, 0.5), 0.0);
}

TEST(DotD, MatchesDerivativeOfDeviance) {
  // d/d eta of D(y, g^{-1}(eta)) / (2 phi).
  const double h = 1e-6;
  for (const auto& [kind, link] : supported_pairs()) {
    const FamilySpec fam(kind, 2.5);
    const double mu = kind == FamilyKind::Bernoulli ? 0.3 : 1.4;
    const double y = kind == FamilyKind::Bernoulli ? 1.0 : 2.0;
    const double eta = link_eval(link, mu);
    const auto obj = [&](double e) {
      return unit_deviance(fam, y, link_inverse(link, e), 1.5) / (2 * 0.7);
    };
    const double fd = (obj(eta + h) - obj(eta - h)) / (2 * h);
    EXPECT_NEAR(dot_d(fam, link, y, mu, 1.5, 0.7), fd, 1e-6 * std::max(1.0, std::abs(fd)))
        << family_name(kind) << "/" << link_name(link);
  }
}

TEST(DdotD, Values) {
  const LinkSpec log(LinkKind::Log);
  EXPECT_DOUBLE_EQ(ddot_d(FamilyKind::Poisson, log, 0.0, 2.0, 1.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(ddot_d(FamilyKind::Poisson, log, 7.0, 2.0, 1.0, 1.0, HessianForm::Observed),
                   2.0);
  EXPECT_DOUBLE_EQ(ddot_d(FamilyKind::Gaussian, LinkKind::Identity, 0.0, 1.0, 3.0, 1.0), 3.0);
}

TEST(DdotD, ObservedMatchesSecondDerivative) {
  const double h = 1e-4;
  for (const auto& [kind, link] : supported_pairs()) {
    const FamilySpec fam(kind, 2.5);
    const double mu = kind == FamilyKind::Bernoulli ? 0.3 : 1.4;
    const double y = kind == FamilyKind::Bernoulli ? 1.0 : 2.0;
    const double eta = link_eval(link, mu);
    const auto obj = [&](double e) { return unit_deviance(fam, y, link_inverse(link, e)) / 2; };
    const double fd = (obj(eta + h) - 2 * obj(eta) + obj(eta - h)) / (h * h);
    EXPECT_NEAR(ddot_d(fam, link, y, mu, 1.0, 1.0, HessianForm::Observed), fd,
                1e-4 * std::max(1.0, std::abs(fd)))
        << family_name(kind) << "/" << link_name(link);
  }
}

TEST(DdotD, FisherIsPositive) {
  for (const auto& [kind, link] : supported_pairs()) {
    const double mu = kind == FamilyKind::Bernoulli ? 0.6 : 0.9;
    EXPECT_GT(ddot_d(FamilySpec(kind, 1.0), link, 1.0, mu, 1.0, 1.0), 0.0);
  }
}

TEST(Family, NamesRoundTrip) {
  for (FamilyKind k : {FamilyKind::Gaussian, FamilyKind::Gamma, FamilyKind::InverseGaussian,
                       FamilyKind::Poisson, FamilyKind::Bernoulli, FamilyKind::NegBinomial})
    EXPECT_EQ(parse_family(family_name(k)), k);
  for (LinkKind k : {LinkKind::Identity, LinkKind::Log, LinkKind::Logit, LinkKind::Inverse,
                     LinkKind::InverseSquared})
    EXPECT_EQ(parse_link(link_name(k)), k);
  EXPECT_THROW(parse_family("binomialish"), ConfigError);
}

TEST(Family, CanonicalLinksAreSupported) {
  for (FamilyKind k : {FamilyKind::Gaussian, FamilyKind::Gamma, FamilyKind::InverseGaussian,
                       FamilyKind::Poisson, FamilyKind::Bernoulli, FamilyKind::NegBinomial})
    EXPECT_TRUE(is_supported(k, canonical_link(k)));
  EXPECT_EQ(canonical_link(FamilyKind::NegBinomial), LinkKind::Log);
}

TEST(Family, ResponseSupport) {
  EXPECT_THROW(check_response(FamilyKind::Poisson, -1.0), DomainError);
  EXPECT_THROW(check_response(FamilyKind::Bernoulli, 2.0), DomainError);
  EXPECT_NO_THROW(check_response(FamilyKind::Poisson, 2.5));
  EXPECT_THROW(check_response(FamilyKind::Gaussian, std::numeric_limits<double>::quiet_NaN()),
               DomainError);
}

TEST(Family, ClampKeepsMeansInsideDomain) {
  EXPECT_GT(clamp_mean(FamilyKind::Poisson, 1e-310), 1e-310);
  EXPECT_LT(clamp_mean(FamilyKind::Bernoulli, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(clamp_mean(FamilyKind::Gaussian, -5.0), -5.0);
}
