#include <algorithm>

#include "fit_loop.hpp"
#include "gmfkit/optim.hpp"

namespace gmfkit {

NewtonStepper::NewtonStepper(const ResponseMatrix& data, const CovariateSet& covs,
                             const FamilySpec& fam, const LinkSpec& link,
                             const PenaltyConfig& penalty, const NewtonConfig& cfg,
                             FactorizationState init)
    : covs_(covs), fam_(fam), link_(link), penalty_(penalty), cfg_(cfg), state_(std::move(init)) {
  cfg_.validate();
  penalty_.validate();
  check_shapes(state_, data, covs_);
  estimate_phi_ = cfg_.dispersion_enabled(fam_);
  estimate_shape_ = cfg_.estimate_nb_shape && fam_.kind == FamilyKind::NegBinomial;
  if (fam_.kind == FamilyKind::NegBinomial && !cfg_.estimate_nb_shape)
    state_.nb_shape = fam_.nb_shape;
  working_ = detail::make_working_copy(data, state_, covs_, fam_, link_);
}

void NewtonStepper::step() {
  const Minibatch all = Minibatch::full(working_.rows(), working_.cols());
  if (cfg_.nafill_every > 0 && t_ % cfg_.nafill_every == 0)
    impute_block(state_, covs_, fam_, link_, working_, all);

  const EntryBlock entries =
      entry_derivatives(state_, working_, covs_, fam_, link_, all.rows, all.cols);
  const GradientPair grad = assemble_gradients(state_, covs_, penalty_, all, entries);

  const Matrix step_row =
      cfg_.stepsize * (grad.g_row.array() / (grad.h_row.array() + cfg_.damping)).matrix();
  const Matrix step_col =
      cfg_.stepsize * (grad.g_col.array() / (grad.h_col.array() + cfg_.damping)).matrix();
  const Matrix theta_row = hcat(state_.gamma(all.rows, Eigen::all), state_.u(all.rows, Eigen::all));
  const Matrix theta_col = hcat(state_.b(all.cols, Eigen::all), state_.v(all.cols, Eigen::all));
  set_row_params(state_, all.rows, theta_row - step_row);
  set_col_params(state_, all.cols, theta_col - step_col);

  if (estimate_phi_) {
    state_.phi = std::max(cfg_.phi_floor,
                          detail::pearson_from_means(state_, working_, fam_, all, entries.mu));
  }
  if (estimate_shape_) {
    state_.nb_shape = std::max(
        cfg_.nb_shape_floor, detail::nb_moment_from_means(working_, all, entries.mu, cfg_.nb_shape_max));
  }
  ++t_;
}

FitResult fit_newton(const ResponseMatrix& data, const CovariateSet& covs,
                     const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty,
                     const NewtonConfig& cfg, const FactorizationState& init) {
  NewtonStepper stepper(data, covs, fam, link, penalty, cfg, init);
  return detail::run_fit(
      "newton", data, covs, fam, link, penalty, cfg, cfg.max_iter, [&] { stepper.step(); },
      [&]() -> const FactorizationState& { return stepper.state(); });
}

}  // namespace gmfkit
