#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gmfkit/errors.hpp"
#include "gmfkit/metrics.hpp"
#include "oracles.hpp"

using namespace gmfkit;

TEST(RelLogRmse, Values) {
  const std::vector<double> y{1, 3, 0, 7};
  const double ybar = 2.75;
  const std::vector<double> flat(4, ybar);
  EXPECT_DOUBLE_EQ(rel_log_rmse(y, flat, ybar), 1.0);
  EXPECT_EQ(rel_log_rmse(y, y, ybar), 0.0);
  EXPECT_DOUBLE_EQ(rel_log_rmse(std::vector<double>{1, 3}, std::vector<double>{2, 2}, 2.0), 1.0);
}

TEST(RelLogRmse, IsRatioOfSquaredSums) {
  const std::vector<double> y{0, 4};
  const std::vector<double> mu{1, 1};
  const double num = std::pow(std::log(1.0 / 2.0), 2) + std::pow(std::log(5.0 / 2.0), 2);
  const double den = std::pow(std::log(1.0 / 3.0), 2) + std::pow(std::log(5.0 / 3.0), 2);
  EXPECT_NEAR(rel_log_rmse(y, mu, 2.0), num / den, 1e-14);
}

TEST(RelLogRmse, DegenerateBaselineThrows) {
  const std::vector<double> y{2, 2};
  EXPECT_THROW(rel_log_rmse(y, std::vector<double>{1, 1}, 2.0), DegenerateError);
}

TEST(RelDeviance, Values) {
  const std::vector<double> y{0, 2};
  const std::vector<double> ones{1, 1};
  EXPECT_NEAR(rel_deviance(y, ones, 1.0, FamilyKind::Poisson), 1.0, 1e-15);
  const std::vector<double> pos{1, 2};
  EXPECT_EQ(rel_deviance(pos, pos, 1.5, FamilyKind::Poisson), 0.0);
  const std::vector<double> mu{0.5, 2.5};
  const double want = (oracle::unit_deviance(FamilyKind::Poisson, 0, 0.5) +
                       oracle::unit_deviance(FamilyKind::Poisson, 2, 2.5)) /
                      (oracle::unit_deviance(FamilyKind::Poisson, 0, 1) +
                       oracle::unit_deviance(FamilyKind::Poisson, 2, 1));
  EXPECT_NEAR(rel_deviance(y, mu, 1.0, FamilyKind::Poisson), want, 1e-14);
}

TEST(RelDeviance, LengthMismatchThrows) {
  EXPECT_THROW(rel_deviance(std::vector<double>{1, 2}, std::vector<double>{1}, 1.0,
                            FamilyKind::Poisson),
               Error);
}

TEST(Evaluate, UsesListedEntries) {
  Matrix truth(2, 2);
  truth << 0, 4, 1, 3;
  Matrix mu = truth;
  mu(0, 0) = 9.0;  // not listed
  const std::vector<std::pair<Index, Index>> entries{{1, 0}, {0, 1}, {1, 1}};
  const EvalResult r = evaluate(truth, mu, entries, 2.0, FamilyKind::Poisson);
  EXPECT_EQ(r.n_test, 3);
  EXPECT_EQ(r.rel_log_rmse, 0.0);
  EXPECT_EQ(r.rel_deviance, 0.0);
}

TEST(ObservedMean, SkipsMissing) {
  Matrix y(2, 2);
  y << 1, 2, 3, 100;
  Mask mask = Mask::Constant(2, 2, true);
  mask(1, 1) = false;
  EXPECT_DOUBLE_EQ(observed_mean(ResponseMatrix(y, mask)), 2.0);
}
