#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "gmfkit/init.hpp"
#include "gmfkit/select.hpp"
#include "oracles.hpp"

using namespace gmfkit;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Matrix out(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) out(i, j) = z(rng);
  return out;
}

FitSettings airwls_settings() {
  FitSettings fs;
  fs.algorithm = Algorithm::Airwls;
  fs.airwls.max_iter = 300;
  fs.airwls.tol = 1e-8;
  return fs;
}

}  // namespace

TEST(InformationCriteria, BicMinusAicIsPenaltyGap) {
  const auto inst =
      oracle::random_instance(FamilyKind::Poisson, LinkKind::Log, 15, 9, 2, 1, 0, 0.1, 3);
  const InformationCriteria ic =
      information_criteria(inst.state, inst.data, inst.covs, FamilyKind::Poisson, LinkKind::Log);
  EXPECT_EQ(ic.k, parameter_count(15, 9, 1, 0, 2));
  const double logn = std::log(static_cast<double>(inst.data.observed_count()));
  EXPECT_NEAR(ic.bic - ic.aic, static_cast<double>(ic.k) * (logn - 2.0), 1e-9);
  EXPECT_NEAR(ic.aic, ic.neg2_loglik + 2.0 * static_cast<double>(ic.k), 1e-9);
}

TEST(InformationCriteria, PoissonLikelihoodIsExact) {
  const auto inst =
      oracle::random_instance(FamilyKind::Poisson, LinkKind::Log, 7, 5, 1, 1, 0, 0.0, 5);
  const ResponseMatrix data(inst.data.values());
  const InformationCriteria ic =
      information_criteria(inst.state, data, inst.covs, FamilyKind::Poisson, LinkKind::Log);
  const Matrix mu = fitted_means(inst.state, inst.covs, LinkKind::Log);
  double ll = 0.0;
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 5; ++j) ll += oracle::poisson_logpmf(data.value(i, j), mu(i, j));
  EXPECT_NEAR(ic.neg2_loglik, -2.0 * ll, 1e-9 * std::abs(ll));
}

TEST(InformationCriteria, TrueRankBeatsNullOnNoiselessData) {
  std::mt19937_64 rng(7);
  const Matrix eta = 0.5 * randn(40, 2, rng) * randn(15, 2, rng).transpose();
  const Matrix mu = eta.array().exp().matrix();
  const ResponseMatrix data(mu);
  const CovariateSet covs = CovariateSet::none(40, 15);
  const FamilySpec fam(FamilyKind::Poisson);
  const LinkSpec link(LinkKind::Log);
  PenaltyConfig pen;
  pen.lambda = 1e-6;
  const FitSettings fs = airwls_settings();
  double aic[3];
  for (Index d : {0, 2}) {
    const FactorizationState init = initialize(data, covs, fam, link, d).state;
    const FitResult fit = fit_model(data, covs, fam, link, pen, fs, init);
    aic[d] = information_criteria(fit.state, data, covs, fam, link).aic;
  }
  EXPECT_LT(aic[2], aic[0]);
}

TEST(Holdout, Sizes) {
  const ResponseMatrix full(Matrix::Ones(100, 50));
  EXPECT_EQ(holdout_mask(full, 0.3, 1).test.size(), 1500u);
  const Holdout none = holdout_mask(full, 1e-6, 1);
  EXPECT_TRUE(none.test.empty());
  EXPECT_EQ(none.train.observed_count(), 5000);
}

TEST(Holdout, DeterministicAndDisjoint) {
  const auto inst =
      oracle::random_instance(FamilyKind::Poisson, LinkKind::Log, 30, 20, 1, 1, 0, 0.1, 9);
  const Holdout a = holdout_mask(inst.data, 0.25, 42);
  const Holdout b = holdout_mask(inst.data, 0.25, 42);
  EXPECT_EQ(a.test, b.test);
  EXPECT_TRUE((a.train.mask() == b.train.mask()).all());
  EXPECT_NE(holdout_mask(inst.data, 0.25, 43).test, a.test);
  std::set<std::pair<Index, Index>> uniq(a.test.begin(), a.test.end());
  EXPECT_EQ(uniq.size(), a.test.size());
  for (const auto& [i, j] : a.test) {
    EXPECT_TRUE(inst.data.observed(i, j));
    EXPECT_FALSE(a.train.observed(i, j));
  }
  EXPECT_EQ(a.train.observed_count() + static_cast<Index>(a.test.size()),
            inst.data.observed_count());
  for (Index i = 0; i < 30; ++i) EXPECT_TRUE(a.train.mask().row(i).any());
  for (Index j = 0; j < 20; ++j) EXPECT_TRUE(a.train.mask().col(j).any());
}

TEST(Holdout, BadFractionThrows) {
  const ResponseMatrix full(Matrix::Ones(4, 4));
  EXPECT_THROW(holdout_mask(full, 1.0, 1), ConfigError);
  EXPECT_THROW(holdout_mask(full, -0.1, 1), ConfigError);
}

TEST(CvRankSelect, NoiselessRankTwoGaussian) {
  std::mt19937_64 rng(11);
  const Matrix y = randn(40, 2, rng) * randn(16, 2, rng).transpose();
  const ResponseMatrix data(y);
  CvOptions opts;
  opts.folds = 3;
  opts.fit = airwls_settings();
  // Relative objective changes are large near a zero objective, so a loose
  // tolerance stops the noiseless fits early.
  opts.fit.airwls.max_iter = 5000;
  opts.fit.airwls.tol = 1e-13;
  opts.penalty.lambda = 1e-4;
  const RankSelectionReport rep =
      cv_rank_select(data, CovariateSet::none(40, 16), FamilyKind::Gaussian, LinkKind::Identity,
                     {0, 1, 2, 3, 4, 5}, opts);
  ASSERT_EQ(rep.cv_mean.size(), 6u);
  EXPECT_EQ(rep.chosen.at("cv"), 2);
  EXPECT_EQ(rep.cells.size(), 18u);
  EXPECT_EQ(rep.failed_cells, 0);
}

TEST(CvRankSelect, NullModelOnly) {
  const auto inst =
      oracle::random_instance(FamilyKind::Poisson, LinkKind::Log, 20, 8, 1, 1, 0, 0.0, 13);
  CvOptions opts;
  opts.folds = 2;
  const RankSelectionReport rep =
      cv_rank_select(inst.data, inst.covs, FamilyKind::Poisson, LinkKind::Log, {0}, opts);
  ASSERT_EQ(rep.ranks.size(), 1u);
  EXPECT_EQ(rep.ranks[0], 0);
  EXPECT_EQ(rep.cells.size(), 2u);
  EXPECT_EQ(rep.chosen.at("cv"), 0);
  EXPECT_TRUE(std::isfinite(rep.cv_mean[0]));
}

TEST(Scree, RankThreeSignalDropsAfterThree) {
  std::mt19937_64 rng(17);
  const Matrix l = 0.5 * randn(60, 3, rng) * randn(25, 3, rng).transpose() +
                   randn(60, 25, rng, 1e-4);
  const ResponseMatrix data(l.array().exp().matrix() - Matrix::Ones(60, 25));
  const auto ev = scree_eigenvalues(data, CovariateSet::none(60, 25), 8);
  ASSERT_EQ(ev.size(), 8u);
  for (std::size_t k = 3; k < ev.size(); ++k) EXPECT_LT(ev[k] * 10.0, ev[2]);
  EXPECT_TRUE(std::is_sorted(ev.rbegin(), ev.rend()));
  EXPECT_EQ(elbow_pick(ev).rank, 3);
}

TEST(Scree, PureNoiseHasNoLargeGap) {
  std::mt19937_64 rng(19);
  const Matrix l = randn(100, 40, rng, 0.3);
  const ResponseMatrix data(l.array().exp().matrix() - Matrix::Ones(100, 40));
  const auto ev = scree_eigenvalues(data, CovariateSet::none(100, 40), 10);
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) EXPECT_LT(ev[k], 2.0 * ev[k + 1]);
}

TEST(Scree, ZeroMatrix) {
  const ResponseMatrix data(Matrix::Zero(10, 6));
  for (double e : scree_eigenvalues(data, CovariateSet::intercept(10, 6), 4)) EXPECT_EQ(e, 0.0);
}

TEST(Scree, ResidualsRemoveCovariates) {
  std::mt19937_64 rng(23);
  const Matrix y = (randn(20, 7, rng).array().abs()).matrix();
  const Matrix r = log_residuals(ResponseMatrix(y), CovariateSet::intercept(20, 7));
  EXPECT_LT(r.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  const Matrix scores = scree_scores(ResponseMatrix(y), CovariateSet::intercept(20, 7), 2);
  EXPECT_EQ(scores.rows(), 20);
  EXPECT_EQ(scores.cols(), 2);
}

TEST(Elbow, GapRatio) {
  EXPECT_EQ(elbow_pick({100, 90, 80, 5, 4}).rank, 3);
  const ElbowPick geo = elbow_pick({16, 8, 4, 2, 1});
  EXPECT_EQ(geo.rank, 1);
  EXPECT_TRUE(geo.ambiguous);
  const ElbowPick single = elbow_pick({10});
  EXPECT_EQ(single.rank, 1);
  EXPECT_TRUE(single.warning);
}
