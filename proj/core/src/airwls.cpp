#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fit_loop.hpp"
#include "gmfkit/identify.hpp"
#include "gmfkit/optim.hpp"
#include "gmfkit/parallel.hpp"

namespace gmfkit {

namespace {

constexpr int kMaxHalvings = 20;

// One penalized GLM: responses y (entries with include = false are skipped),
// design a, offset, ridge weights pen. theta is updated in place.
struct RidgeGlm {
  const FamilySpec& fam;
  const LinkSpec& link;
  double phi;
  double damping;
  double stepsize;

  // Half deviance over phi plus the ridge term, or +inf outside the domain.
  double objective(const Matrix& a, const Vector& y, const Vector& w,
                   const Eigen::Array<bool, Eigen::Dynamic, 1>& include, const Vector& offset,
                   const Vector& pen, const Vector& theta) const {
    double total = 0.5 * (pen.array() * theta.array().square()).sum();
    try {
      for (Index k = 0; k < y.size(); ++k) {
        if (!include(k)) continue;
        const double mu = clamp_mean(fam, link_inverse(link, offset(k) + a.row(k).dot(theta)));
        total += unit_deviance(fam, y(k), mu, w(k)) / (2.0 * phi);
      }
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
  }

  void scoring_step(const Matrix& a, const Vector& y, const Vector& w,
                    const Eigen::Array<bool, Eigen::Dynamic, 1>& include, const Vector& offset,
                    const Vector& pen, Vector& theta, const std::string& where) const {
    const Index dim = theta.size();
    Vector grad = pen.cwiseProduct(theta);
    Matrix hess = Matrix::Zero(dim, dim);
    double base = 0.5 * (pen.array() * theta.array().square()).sum();
    for (Index k = 0; k < y.size(); ++k) {
      if (!include(k)) continue;
      const double mu = clamp_mean(fam, link_inverse(link, offset(k) + a.row(k).dot(theta)));
      base += unit_deviance(fam, y(k), mu, w(k)) / (2.0 * phi);
      const double nu = variance(fam, mu);
      const double g1 = link_deriv1(link, mu);
      const double dot = -w(k) * (y(k) - mu) / (phi * nu * g1);
      const double ddot = w(k) / (phi * nu * g1 * g1);
      grad.noalias() += dot * a.row(k).transpose();
      hess.noalias() += ddot * a.row(k).transpose() * a.row(k);
    }
    hess.diagonal() += pen;
    hess.diagonal().array() += damping;
    Eigen::LLT<Matrix> llt(hess);
    if (llt.info() != Eigen::Success)
      throw SingularSystemError("penalized scoring system is singular at " + where);
    const Vector delta = llt.solve(grad);
    if (!delta.allFinite())
      throw SingularSystemError("penalized scoring system is singular at " + where);

    double t = stepsize;
    for (int h = 0; h <= kMaxHalvings; ++h, t *= 0.5) {
      const Vector cand = theta - t * delta;
      if (objective(a, y, w, include, offset, pen, cand) <= base) {
        theta = cand;
        return;
      }
    }
    // No decrease along the scoring direction: keep theta.
  }
};

}  // namespace

AirwlsStepper::AirwlsStepper(const ResponseMatrix& data, const CovariateSet& covs,
                             const FamilySpec& fam, const LinkSpec& link,
                             const PenaltyConfig& penalty, const AirwlsConfig& cfg,
                             FactorizationState init)
    : covs_(covs), fam_(fam), link_(link), penalty_(penalty), cfg_(cfg), state_(std::move(init)) {
  cfg_.validate();
  penalty_.validate();
  check_shapes(state_, data, covs_);
  estimate_phi_ = cfg_.dispersion_enabled(fam_);
  estimate_shape_ = cfg_.estimate_nb_shape && fam_.kind == FamilyKind::NegBinomial;
  if (fam_.kind == FamilyKind::NegBinomial && !cfg_.estimate_nb_shape)
    state_.nb_shape = fam_.nb_shape;
  // Each row and column solve skips unobserved entries, which minimizes the
  // observed-data objective directly; no imputation is needed.
  working_ = data;
}

void AirwlsStepper::update_rows() {
  const FamilySpec f = effective_family(fam_, state_);
  const Index n = working_.rows();
  const Index m = working_.cols();
  const Matrix design = hcat(covs_.z, state_.v);  // m x (q + d)
  const Vector pen = row_penalty(penalty_, covs_.q(), state_.rank());
  const Matrix offsets = covs_.p() > 0 ? Matrix(covs_.x * state_.b.transpose())
                                       : Matrix(Matrix::Zero(n, m));
  Matrix theta_all = hcat(state_.gamma, state_.u);
  const RidgeGlm glm{f, link_, state_.phi, cfg_.damping, cfg_.stepsize};
  parallel_for(0, n, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    for (Index i = lo; i < hi; ++i) {
      const Vector y = working_.values().row(i).transpose();
      const Vector w = working_.weights().row(i).transpose();
      Eigen::Array<bool, Eigen::Dynamic, 1> include(m);
      for (Index j = 0; j < m; ++j) include(j) = working_.participates(i, j);
      const Vector offset = offsets.row(i).transpose();
      Vector theta = theta_all.row(i).transpose();
      for (int s = 0; s < cfg_.nsteps; ++s)
        glm.scoring_step(design, y, w, include, offset, pen, theta, "row " + std::to_string(i));
      theta_all.row(i) = theta.transpose();
    }
  }, 16);
  set_row_params(state_, all_indices(n), theta_all);
}

void AirwlsStepper::update_cols() {
  const FamilySpec f = effective_family(fam_, state_);
  const Index n = working_.rows();
  const Index m = working_.cols();
  const Matrix design = hcat(covs_.x, state_.u);  // n x (p + d)
  const Vector pen = col_penalty(penalty_, covs_.p(), state_.rank());
  const Matrix offsets = covs_.q() > 0 ? Matrix(covs_.z * state_.gamma.transpose())
                                       : Matrix(Matrix::Zero(m, n));
  Matrix theta_all = hcat(state_.b, state_.v);
  const RidgeGlm glm{f, link_, state_.phi, cfg_.damping, cfg_.stepsize};
  parallel_for(0, m, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    for (Index j = lo; j < hi; ++j) {
      const Vector y = working_.values().col(j);
      const Vector w = working_.weights().col(j);
      Eigen::Array<bool, Eigen::Dynamic, 1> include(n);
      for (Index i = 0; i < n; ++i) include(i) = working_.participates(i, j);
      const Vector offset = offsets.row(j).transpose();
      Vector theta = theta_all.row(j).transpose();
      for (int s = 0; s < cfg_.nsteps; ++s)
        glm.scoring_step(design, y, w, include, offset, pen, theta,
                         "column " + std::to_string(j));
      theta_all.row(j) = theta.transpose();
    }
  }, 4);
  set_col_params(state_, all_indices(m), theta_all);
}

void AirwlsStepper::step() {
  const Minibatch all = Minibatch::full(working_.rows(), working_.cols());
  update_rows();
  update_cols();
  if (cfg_.rebalance) state_ = rebalance(state_, covs_, penalty_);
  if (estimate_phi_ || estimate_shape_) {
    const Matrix mu = linear_predictor(state_, covs_).unaryExpr([&](double e) {
      return clamp_mean(effective_family(fam_, state_), link_inverse(link_, e));
    });
    if (estimate_phi_)
      state_.phi =
          std::max(cfg_.phi_floor, detail::pearson_from_means(state_, working_, fam_, all, mu));
    if (estimate_shape_)
      state_.nb_shape = std::max(cfg_.nb_shape_floor,
                                 detail::nb_moment_from_means(working_, all, mu, cfg_.nb_shape_max));
  }
  ++t_;
}

FitResult fit_airwls(const ResponseMatrix& data, const CovariateSet& covs,
                     const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty,
                     const AirwlsConfig& cfg, const FactorizationState& init) {
  AirwlsStepper stepper(data, covs, fam, link, penalty, cfg, init);
  return detail::run_fit(
      "airwls", data, covs, fam, link, penalty, cfg, cfg.max_iter, [&] { stepper.step(); },
      [&]() -> const FactorizationState& { return stepper.state(); });
}

}  // namespace gmfkit
