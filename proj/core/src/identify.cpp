#include "gmfkit/identify.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gmfkit/errors.hpp"
#include "gmfkit/linalg.hpp"

namespace gmfkit {

namespace {

// Singular values below this fraction of the largest count as zero.
constexpr double kRankTol = 1e-10;

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// Sweep the covariate spans out of Gamma, U and V, moving the removed parts
// into B and Gamma.
void project_covariates(FactorizationState& s, const CovariateSet& covs) {
  const Index p = covs.p();
  const Index q = covs.q();
  const Index d = s.rank();
  if (p > 0 && q > 0) {
    const Matrix dg = least_squares(covs.x, s.gamma, "row design X");
    s.gamma -= covs.x * dg;
    s.b += covs.z * dg.transpose();
  }
  if (p > 0 && d > 0) {
    const Matrix du = least_squares(covs.x, s.u, "row design X");
    s.u -= covs.x * du;
    s.b += s.v * du.transpose();
  }
  if (q > 0 && d > 0) {
    const Matrix dv = least_squares(covs.z, s.v, "column design Z");
    s.v -= covs.z * dv;
    s.gamma += s.u * dv.transpose();
  }
}

bool all_finite_blocks(const FactorizationState& s) {
  return s.b.allFinite() && s.gamma.allFinite() && s.u.allFinite() && s.v.allFinite();
}

Index spectral_rank(const Vector& sv) {
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  Index r = 0;
  for (Index k = 0; k < sv.size(); ++k)
    if (sv(k) > kRankTol * sv(0)) ++r;
  return r;
}

void apply_svd_form(Projection& out, IdentifiabilityMode mode) {
  FactorizationState& s = out.state;
  SvdResult svd = factor_product_svd(s.u, s.v);
  const Index r = spectral_rank(svd.s);
  for (Index k = r; k < svd.s.size(); ++k) svd.s(k) = 0.0;
  out.effective_rank = r;
  out.rank_deficient = r < s.rank();
  if (mode == IdentifiabilityMode::B1) {
    s.u = svd.u * svd.s.asDiagonal();
    s.v = svd.v;
    fix_column_signs(s.v, s.u);
  } else {
    s.u = svd.u;
    s.v = svd.v * svd.s.asDiagonal();
    fix_column_signs(s.u, s.v);
  }
}

void apply_factor_form(Projection& out) {
  FactorizationState& s = out.state;
  const Index n = s.n();
  const Index d = s.rank();
  if (s.m() < d) throw ConfigError("B3 needs at least as many columns as the rank");
  const Vector colsum = s.u.colwise().sum().transpose();
  const Matrix cov =
      (s.u.transpose() * s.u - colsum * colsum.transpose() / static_cast<double>(n)) /
      static_cast<double>(n);
  Index r = 0;
  const Matrix root = sym_sqrt(cov, kRankTol * kRankTol, &r);
  const Matrix inv_root = sym_inv_sqrt(cov, kRankTol * kRankTol);
  out.effective_rank = r;
  out.rank_deficient = r < d;
  s.u = s.u * inv_root;
  s.v = s.v * root;

  Eigen::HouseholderQR<Matrix> qr(s.v.transpose());
  const Matrix q = qr.householderQ();
  const Matrix rt = qr.matrixQR().triangularView<Eigen::Upper>();
  s.u = s.u * q;
  s.v = rt.transpose();

  for (Index k = 0; k < d; ++k) {
    if (s.v(k, k) < 0.0) {
      s.u.col(k) *= -1.0;
      s.v.col(k) *= -1.0;
    }
  }
}

}  // namespace

std::string_view mode_name(IdentifiabilityMode mode) {
  switch (mode) {
    case IdentifiabilityMode::B1: return "B1";
    case IdentifiabilityMode::B2: return "B2";
    case IdentifiabilityMode::B3: return "B3";
  }
  return "B1";
}

IdentifiabilityMode parse_mode(std::string_view name) {
  if (name == "B1" || name == "b1") return IdentifiabilityMode::B1;
  if (name == "B2" || name == "b2") return IdentifiabilityMode::B2;
  if (name == "B3" || name == "b3") return IdentifiabilityMode::B3;
  throw ConfigError("unknown identifiability mode '" + std::string(name) + "'");
}

Projection project_constraints(const FactorizationState& state, const CovariateSet& covs,
                               IdentifiabilityMode mode) {
  check_shapes(state, covs);
  Projection out{state, state.rank(), false};
  project_covariates(out.state, covs);
  if (state.rank() == 0) return out;
  if (mode == IdentifiabilityMode::B3) {
    apply_factor_form(out);
  } else {
    apply_svd_form(out, mode);
  }
  return out;
}

FactorizationState rebalance(const FactorizationState& state, const CovariateSet& covs,
                             const PenaltyConfig& penalty) {
  check_shapes(state, covs);
  FactorizationState cand = state;
  try {
    project_covariates(cand, covs);
  } catch (const SingularSystemError&) {
    return state;
  }
  const double wu = penalty.lambda * penalty.multipliers[2];
  const double wv = penalty.lambda * penalty.multipliers[3];
  const Index d = cand.rank();
  if (d > 0 && wu > 0.0 && wv > 0.0 && cand.n() >= d && cand.m() >= d) {
    const SvdResult svd = factor_product_svd(cand.u, cand.v);
    const double c = std::pow(wv / wu, 0.25);
    const Vector root = svd.s.cwiseMax(0.0).cwiseSqrt();
    cand.u = svd.u * (c * root).asDiagonal();
    cand.v = svd.v * (root / c).asDiagonal();
  }
  if (!all_finite_blocks(cand)) return state;
  return penalty_value(cand, penalty) < penalty_value(state, penalty) ? cand : state;
}

double ConstraintReport::max_violation() const {
  double worst = std::max({xt_gamma, xt_u, zt_v, orthogonality, triangularity});
  if (!signs_ok || !order_ok) worst = std::numeric_limits<double>::infinity();
  return worst;
}

namespace {

// Off-diagonal entries of a Gram matrix relative to the geometric mean of
// their diagonal entries (absolute when those are below one).
double scaled_offdiag(const Matrix& gram) {
  double worst = 0.0;
  for (Index k = 0; k < gram.rows(); ++k) {
    for (Index l = 0; l < gram.cols(); ++l) {
      if (k == l) continue;
      const double scale = std::max(1.0, std::sqrt(std::abs(gram(k, k) * gram(l, l))));
      worst = std::max(worst, std::abs(gram(k, l)) / scale);
    }
  }
  return worst;
}

bool first_nonzero_positive(const Matrix& a) {
  for (Index k = 0; k < a.cols(); ++k) {
    for (Index i = 0; i < a.rows(); ++i) {
      if (std::abs(a(i, k)) > 1e-12) {
        if (a(i, k) < 0.0) return false;
        break;
      }
    }
  }
  return true;
}

bool non_increasing(const Vector& diag) {
  for (Index k = 1; k < diag.size(); ++k)
    if (diag(k) > diag(k - 1) * (1.0 + 1e-10) + 1e-300) return false;
  return true;
}

}  // namespace

ConstraintReport check_constraints(const FactorizationState& state, const CovariateSet& covs,
                                   IdentifiabilityMode mode) {
  check_shapes(state, covs);
  ConstraintReport rep;
  if (covs.p() > 0) {
    rep.xt_gamma = max_abs(covs.x.transpose() * state.gamma);
    rep.xt_u = max_abs(covs.x.transpose() * state.u);
  }
  if (covs.q() > 0) rep.zt_v = max_abs(covs.z.transpose() * state.v);
  const Index d = state.rank();
  if (d == 0) return rep;

  const Matrix utu = state.u.transpose() * state.u;
  const Matrix vtv = state.v.transpose() * state.v;
  const Matrix eye = Matrix::Identity(d, d);
  switch (mode) {
    case IdentifiabilityMode::B1:
      rep.orthogonality = std::max(max_abs(vtv - eye), scaled_offdiag(utu));
      rep.signs_ok = first_nonzero_positive(state.v);
      rep.order_ok = non_increasing(utu.diagonal());
      break;
    case IdentifiabilityMode::B2:
      rep.orthogonality = std::max(max_abs(utu - eye), scaled_offdiag(vtv));
      rep.signs_ok = first_nonzero_positive(state.u);
      rep.order_ok = non_increasing(vtv.diagonal());
      break;
    case IdentifiabilityMode::B3: {
      const double n = static_cast<double>(state.n());
      const Vector colsum = state.u.colwise().sum().transpose();
      const Matrix cov = (utu - colsum * colsum.transpose() / n) / n;
      rep.orthogonality = max_abs(cov - eye);
      const Index top = std::min(d, state.m());
      for (Index k = 0; k < top; ++k) {
        for (Index l = k + 1; l < d; ++l)
          rep.triangularity = std::max(rep.triangularity, std::abs(state.v(k, l)));
        if (!(state.v(k, k) > 0.0)) rep.signs_ok = false;
      }
      break;
    }
  }
  return rep;
}

}  // namespace gmfkit
