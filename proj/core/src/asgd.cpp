#include <algorithm>

#include "fit_loop.hpp"
#include "gmfkit/optim.hpp"

namespace gmfkit {

namespace {

// Scatter-update the smoothed moments of the selected rows and return the
// search step for those rows.
Matrix smoothed_step(Matrix& gbar, Matrix& hbar, const IndexSet& idx, const Matrix& hat_g,
                     const Matrix& hat_h, double a1, double a2, double scale, double damping) {
  const Smoothed sm = smooth_update(gbar(idx, Eigen::all), hbar(idx, Eigen::all), hat_g, hat_h,
                                    a1, a2);
  gbar(idx, Eigen::all) = sm.g;
  hbar(idx, Eigen::all) = sm.h;
  return scale * (sm.g.array() / (sm.h.array() + damping)).matrix();
}

}  // namespace

namespace {

// Concatenated blocks and the positions each block occupies in that order.
IndexSet block_order(const std::vector<IndexSet>& blocks, std::vector<IndexSet>& slots) {
  IndexSet order;
  slots.clear();
  for (const IndexSet& blk : blocks) {
    IndexSet pos;
    for (Index i : blk) {
      pos.push_back(static_cast<Index>(order.size()));
      order.push_back(i);
    }
    slots.push_back(std::move(pos));
  }
  return order;
}

}  // namespace

AsgdStepper::AsgdStepper(const ResponseMatrix& data, const CovariateSet& covs,
                         const FamilySpec& fam, const LinkSpec& link,
                         const PenaltyConfig& penalty, const SgdConfig& cfg,
                         FactorizationState init)
    : fam_(fam), link_(link), penalty_(penalty), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  penalty_.validate();
  check_shapes(init, data, covs);
  estimate_phi_ = cfg_.dispersion_enabled(fam_);
  estimate_shape_ = cfg_.estimate_nb_shape && fam_.kind == FamilyKind::NegBinomial;
  if (fam_.kind == FamilyKind::NegBinomial && !cfg_.estimate_nb_shape)
    init.nb_shape = fam_.nb_shape;

  const Index n = data.rows();
  const Index m = data.cols();
  const Index rows_per = std::min(cfg_.mb_rows, n);
  const Index cols_per = std::min(cfg_.mb_cols, m);
  row_blocks_ = random_partition(n, std::max<Index>(1, n / rows_per), rng_);
  col_blocks_ = random_partition(m, std::max<Index>(1, m / cols_per), rng_);
  row_order_ = block_order(row_blocks_, row_slots_);
  col_order_ = block_order(col_blocks_, col_slots_);

  const ResponseMatrix working = detail::make_working_copy(data, init, covs, fam_, link_);
  working_ = working.permuted(row_order_, col_order_);
  covs_.x = covs.x(row_order_, Eigen::all);
  covs_.z = covs.z(col_order_, Eigen::all);
  state_ = init;
  state_.b = init.b(col_order_, Eigen::all);
  state_.v = init.v(col_order_, Eigen::all);
  state_.gamma = init.gamma(row_order_, Eigen::all);
  state_.u = init.u(row_order_, Eigen::all);

  const Index p = covs_.p();
  const Index q = covs_.q();
  const Index d = state_.rank();
  gbar_row_ = Matrix::Zero(n, q + d);
  hbar_row_ = Matrix::Zero(n, q + d);
  gbar_col_ = Matrix::Zero(m, p + d);
  hbar_col_ = Matrix::Zero(m, p + d);
}

const FactorizationState& AsgdStepper::state() const {
  if (original_stale_) {
    original_ = state_;
    original_.b(col_order_, Eigen::all) = state_.b;
    original_.v(col_order_, Eigen::all) = state_.v;
    original_.gamma(row_order_, Eigen::all) = state_.gamma;
    original_.u(row_order_, Eigen::all) = state_.u;
    original_stale_ = false;
  }
  return original_;
}

ResponseMatrix AsgdStepper::working_data() const {
  IndexSet row_inv(row_order_.size());
  IndexSet col_inv(col_order_.size());
  for (std::size_t k = 0; k < row_order_.size(); ++k)
    row_inv[static_cast<std::size_t>(row_order_[k])] = static_cast<Index>(k);
  for (std::size_t k = 0; k < col_order_.size(); ++k)
    col_inv[static_cast<std::size_t>(col_order_[k])] = static_cast<Index>(k);
  return working_.permuted(row_inv, col_inv);
}

void AsgdStepper::step(std::size_t s) {
  if (s >= col_blocks_.size()) throw IndexError("column block index out of range");
  std::uniform_int_distribution<std::size_t> pick(0, row_blocks_.size() - 1);
  const Minibatch mb{row_slots_[pick(rng_)], col_slots_[s]};
  original_stale_ = true;

  if (cfg_.nafill_every > 0 && t_ % cfg_.nafill_every == 0)
    impute_block(state_, covs_, fam_, link_, working_, mb);

  const EntryBlock entries =
      entry_derivatives(state_, working_, covs_, fam_, link_, mb.rows, mb.cols);
  const GradientPair hat = assemble_gradients(state_, covs_, penalty_, mb, entries);

  const double rho = learning_rate(t_, cfg_);
  const double scale = rho * bias_correction(t_ + 1, cfg_.smooth_a1, cfg_.smooth_a2);

  // Both sides move from the same point, using derivatives evaluated there.
  const Matrix step_row = smoothed_step(gbar_row_, hbar_row_, mb.rows, hat.g_row, hat.h_row,
                                        cfg_.smooth_a1, cfg_.smooth_a2, scale, cfg_.damping);
  const Matrix step_col = smoothed_step(gbar_col_, hbar_col_, mb.cols, hat.g_col, hat.h_col,
                                        cfg_.smooth_a1, cfg_.smooth_a2, scale, cfg_.damping);
  const Matrix theta_row = hcat(state_.gamma(mb.rows, Eigen::all), state_.u(mb.rows, Eigen::all));
  const Matrix theta_col = hcat(state_.b(mb.cols, Eigen::all), state_.v(mb.cols, Eigen::all));
  set_row_params(state_, mb.rows, theta_row - step_row);
  set_col_params(state_, mb.cols, theta_col - step_col);

  if (estimate_phi_) {
    const double hat_phi = detail::pearson_from_means(state_, working_, fam_, mb, entries.mu);
    state_.phi = std::max(cfg_.phi_floor, (1.0 - rho) * state_.phi + rho * hat_phi);
  }
  if (estimate_shape_) {
    const double hat_shape =
        detail::nb_moment_from_means(working_, mb, entries.mu, cfg_.nb_shape_max);
    state_.nb_shape =
        (1.0 - rho) * state_.nb_shape + rho * std::max(cfg_.nb_shape_floor, hat_shape);
  }
  ++t_;
}

void AsgdStepper::epoch() {
  for (std::size_t s = 0; s < col_blocks_.size(); ++s) step(s);
}

FitResult fit_asgd(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                   const LinkSpec& link, const PenaltyConfig& penalty, const SgdConfig& cfg,
                   const FactorizationState& init) {
  AsgdStepper stepper(data, covs, fam, link, penalty, cfg, init);
  return detail::run_fit(
      "asgd", data, covs, fam, link, penalty, cfg, cfg.max_epochs, [&] { stepper.epoch(); },
      [&]() -> const FactorizationState& { return stepper.state(); });
}

}  // namespace gmfkit
