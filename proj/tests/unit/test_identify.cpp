#include <gtest/gtest.h>

#include <random>

#include "gmfkit/errors.hpp"
#include "gmfkit/identify.hpp"
#include "oracles.hpp"

using namespace gmfkit;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix out(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) out(i, j) = z(rng);
  return out;
}

struct Problem {
  FactorizationState state;
  CovariateSet covs;
};

Problem random_problem(Index n, Index m, Index d, Index p, Index q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Problem pr;
  pr.covs.x = randn(n, p, rng);
  if (p > 0) pr.covs.x.col(0).setOnes();
  pr.covs.z = randn(m, q, rng);
  pr.state = FactorizationState::zeros(n, m, p, q, d);
  pr.state.b = randn(m, p, rng);
  pr.state.gamma = randn(n, q, rng);
  pr.state.u = randn(n, d, rng);
  pr.state.v = randn(m, d, rng);
  return pr;
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Projection, PreservesLinearPredictor) {
  for (IdentifiabilityMode mode :
       {IdentifiabilityMode::B1, IdentifiabilityMode::B2, IdentifiabilityMode::B3}) {
    const Problem pr = random_problem(20, 8, 3, 2, 1, 3);
    const Projection out = project_constraints(pr.state, pr.covs, mode);
    const Matrix before = linear_predictor(pr.state, pr.covs);
    const Matrix after = linear_predictor(out.state, pr.covs);
    EXPECT_LT(max_abs(before - after), 1e-10) << mode_name(mode);
    EXPECT_EQ(out.effective_rank, 3);
    EXPECT_FALSE(out.rank_deficient);
  }
}

TEST(Projection, SatisfiesConstraints) {
  for (IdentifiabilityMode mode :
       {IdentifiabilityMode::B1, IdentifiabilityMode::B2, IdentifiabilityMode::B3}) {
    const Problem pr = random_problem(30, 12, 3, 2, 2, 5);
    const Projection out = project_constraints(pr.state, pr.covs, mode);
    const ConstraintReport rep = check_constraints(out.state, pr.covs, mode);
    EXPECT_LT(rep.max_violation(), 1e-8) << mode_name(mode);
    EXPECT_TRUE(rep.signs_ok);
    EXPECT_TRUE(rep.order_ok);
  }
}

TEST(Projection, InterceptCentersGamma) {
  Problem pr = random_problem(15, 6, 0, 1, 1, 7);
  const Projection out = project_constraints(pr.state, pr.covs, IdentifiabilityMode::B1);
  EXPECT_LT(std::abs(out.state.gamma.sum()), 1e-10);
  EXPECT_LT(max_abs(linear_predictor(pr.state, pr.covs) - linear_predictor(out.state, pr.covs)),
            1e-10);
}

TEST(Projection, SvdFormIsFixedPoint) {
  // U = P S, V = Q with orthonormal P, Q and decreasing S.
  std::mt19937_64 rng(11);
  const Eigen::HouseholderQR<Matrix> qp(randn(10, 3, rng));
  const Eigen::HouseholderQR<Matrix> qq(randn(7, 3, rng));
  const Matrix p = qp.householderQ() * Matrix::Identity(10, 3);
  const Matrix q = qq.householderQ() * Matrix::Identity(7, 3);
  FactorizationState s = FactorizationState::zeros(10, 7, 0, 0, 3);
  s.u = p * Vector(Eigen::Vector3d(5.0, 2.0, 0.5)).asDiagonal();
  s.v = q;
  const CovariateSet covs = CovariateSet::none(10, 7);
  const Projection out = project_constraints(s, covs, IdentifiabilityMode::B1);
  for (Index k = 0; k < 3; ++k) {
    const double sign = out.state.v.col(k).dot(s.v.col(k)) > 0 ? 1.0 : -1.0;
    EXPECT_LT(max_abs(out.state.v.col(k) - sign * s.v.col(k)), 1e-12);
    EXPECT_LT(max_abs(out.state.u.col(k) - sign * s.u.col(k)), 1e-12);
  }
}

TEST(Projection, RankDeficientInputIsFlagged) {
  Problem pr = random_problem(12, 6, 3, 0, 0, 13);
  pr.state.u.col(2) = pr.state.u.col(0);
  pr.state.v.col(2) = -pr.state.v.col(0);
  const Projection out = project_constraints(pr.state, pr.covs, IdentifiabilityMode::B1);
  EXPECT_EQ(out.effective_rank, 1);
  EXPECT_TRUE(out.rank_deficient);
}

TEST(ConstraintCheck, RotationBreaksOrthogonalityOnly) {
  const Problem pr = random_problem(25, 10, 3, 2, 1, 17);
  const Projection out = project_constraints(pr.state, pr.covs, IdentifiabilityMode::B1);
  std::mt19937_64 rng(19);
  const Eigen::HouseholderQR<Matrix> qr(randn(3, 3, rng));
  const Matrix rot = qr.householderQ();
  FactorizationState rotated = out.state;
  rotated.u = out.state.u * rot;
  rotated.v = out.state.v * rot;
  const ConstraintReport rep = check_constraints(rotated, pr.covs, IdentifiabilityMode::B1);
  EXPECT_LT(rep.xt_gamma, 1e-8);
  EXPECT_LT(rep.xt_u, 1e-8);
  EXPECT_LT(rep.zt_v, 1e-8);
  EXPECT_GT(rep.orthogonality, 1e-3);
}

TEST(ConstraintCheck, ZeroFactorsPass) {
  const FactorizationState s = FactorizationState::zeros(6, 4, 0, 0, 0);
  const ConstraintReport rep =
      check_constraints(s, CovariateSet::none(6, 4), IdentifiabilityMode::B1);
  EXPECT_EQ(rep.max_violation(), 0.0);
  EXPECT_TRUE(rep.order_ok);
}

TEST(Rebalance, KeepsPredictorAndLowersPenalty) {
  Problem pr = random_problem(20, 9, 2, 1, 1, 23);
  pr.state.u *= 4.0;
  pr.state.v *= 0.25;
  const PenaltyConfig pen;
  const FactorizationState out = rebalance(pr.state, pr.covs, pen);
  EXPECT_LT(max_abs(linear_predictor(pr.state, pr.covs) - linear_predictor(out, pr.covs)), 1e-10);
  EXPECT_LT(penalty_value(out, pen), penalty_value(pr.state, pen));
  // Balanced split: U and V carry equal squared norms per factor.
  for (Index k = 0; k < 2; ++k)
    EXPECT_NEAR(out.u.col(k).squaredNorm(), out.v.col(k).squaredNorm(),
                1e-9 * out.u.col(k).squaredNorm());
}

TEST(Rebalance, NoGainLeavesStateUnchanged) {
  const Problem pr = random_problem(10, 5, 2, 0, 0, 29);
  PenaltyConfig pen;
  pen.lambda = 0.0;
  const FactorizationState out = rebalance(pr.state, pr.covs, pen);
  EXPECT_EQ(out.u, pr.state.u);
  EXPECT_EQ(out.v, pr.state.v);
}

TEST(Mode, NamesRoundTrip) {
  for (IdentifiabilityMode mode :
       {IdentifiabilityMode::B1, IdentifiabilityMode::B2, IdentifiabilityMode::B3})
    EXPECT_EQ(parse_mode(mode_name(mode)), mode);
  EXPECT_THROW(parse_mode("B4"), ConfigError);
}
