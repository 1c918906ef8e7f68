#include "gmfkit/derivatives.hpp"

#include "gmfkit/errors.hpp"
#include "gmfkit/parallel.hpp"

namespace gmfkit {

EntryBlock entry_derivatives(const FactorizationState& state, const ResponseMatrix& data,
                             const CovariateSet& covs, const FamilySpec& fam,
                             const LinkSpec& link, const IndexSet& rows, const IndexSet& cols) {
  const FamilySpec f = effective_family(fam, state);
  const double phi = state.phi;
  if (!(phi > 0.0)) throw DomainError("non-positive dispersion");
  EntryBlock out;
  out.mu = linear_predictor(state, covs, rows, cols);
  const Index nr = static_cast<Index>(rows.size());
  const Index nc = static_cast<Index>(cols.size());
  out.dot.resize(nr, nc);
  out.ddot.resize(nr, nc);
  parallel_for(0, nc, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    for (Index c = lo; c < hi; ++c) {
      const Index j = cols[static_cast<std::size_t>(c)];
      for (Index r = 0; r < nr; ++r) {
        const Index i = rows[static_cast<std::size_t>(r)];
        const double mu = clamp_mean(f, link_inverse(link, out.mu(r, c)));
        out.mu(r, c) = mu;
        if (!data.participates(i, j)) {
          out.dot(r, c) = 0.0;
          out.ddot(r, c) = 0.0;
          continue;
        }
        const double y = data.value(i, j);
        const double w = data.weight(i, j);
        check_response(f, y);
        const double nu = variance(f, mu);
        const double g1 = link_deriv1(link, mu);
        // Same expressions as dot_d / ddot_d (Fisher form), sharing nu and g'.
        out.dot(r, c) = -w * (y - mu) / (phi * nu * g1);
        out.ddot(r, c) = w / (phi * nu * g1 * g1);
      }
    }
  }, 8);
  return out;
}

Matrix row_params(const FactorizationState& state) {
  return hcat(state.gamma, state.u);
}

Matrix col_params(const FactorizationState& state) {
  return hcat(state.b, state.v);
}

void set_row_params(FactorizationState& state, const IndexSet& rows, const Matrix& values) {
  const Index q = state.gamma.cols();
  const Index d = state.u.cols();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index i = rows[k];
    const Index r = static_cast<Index>(k);
    if (q > 0) state.gamma.row(i) = values.row(r).head(q);
    if (d > 0) state.u.row(i) = values.row(r).tail(d);
  }
}

void set_col_params(FactorizationState& state, const IndexSet& cols, const Matrix& values) {
  const Index p = state.b.cols();
  const Index d = state.v.cols();
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const Index j = cols[k];
    const Index r = static_cast<Index>(k);
    if (p > 0) state.b.row(j) = values.row(r).head(p);
    if (d > 0) state.v.row(j) = values.row(r).tail(d);
  }
}

Vector row_penalty(const PenaltyConfig& penalty, Index q, Index d) {
  Vector out(q + d);
  out.head(q).setConstant(penalty.weight(Block::Gamma));
  out.tail(d).setConstant(penalty.weight(Block::U));
  return out;
}

Vector col_penalty(const PenaltyConfig& penalty, Index p, Index d) {
  Vector out(p + d);
  out.head(p).setConstant(penalty.weight(Block::B));
  out.tail(d).setConstant(penalty.weight(Block::V));
  return out;
}

GradientPair assemble_gradients(const FactorizationState& state, const CovariateSet& covs,
                                const PenaltyConfig& penalty, const Minibatch& mb,
                                const EntryBlock& entries) {
  const Index n = state.u.rows();
  const Index m = state.v.rows();
  const Index p = covs.p();
  const Index q = covs.q();
  const Index d = state.u.cols();
  const double row_scale = static_cast<double>(m) / static_cast<double>(mb.cols.size());
  const double col_scale = static_cast<double>(n) / static_cast<double>(mb.rows.size());

  // Row side: [Z_J, V_J]; column side: [X_I, U_I].
  const Matrix zv = hcat(covs.z(mb.cols, Eigen::all), state.v(mb.cols, Eigen::all));
  const Matrix xu = hcat(covs.x(mb.rows, Eigen::all), state.u(mb.rows, Eigen::all));
  const Matrix theta_row = hcat(state.gamma(mb.rows, Eigen::all), state.u(mb.rows, Eigen::all));
  const Matrix theta_col = hcat(state.b(mb.cols, Eigen::all), state.v(mb.cols, Eigen::all));

  const Vector pen_row = row_penalty(penalty, q, d);
  const Vector pen_col = col_penalty(penalty, p, d);

  GradientPair out;
  out.g_row.noalias() = row_scale * (entries.dot * zv);
  out.g_row += theta_row * pen_row.asDiagonal();
  out.h_row.noalias() = row_scale * (entries.ddot * zv.cwiseAbs2());
  out.h_row.rowwise() += pen_row.transpose();

  out.g_col.noalias() = col_scale * (entries.dot.transpose() * xu);
  out.g_col += theta_col * pen_col.asDiagonal();
  out.h_col.noalias() = col_scale * (entries.ddot.transpose() * xu.cwiseAbs2());
  out.h_col.rowwise() += pen_col.transpose();
  return out;
}

namespace {

void check_minibatch(const Minibatch& mb, Index n, Index m) {
  if (mb.rows.empty() || mb.cols.empty()) throw ConfigError("empty minibatch");
  for (Index i : mb.rows)
    if (i < 0 || i >= n) throw IndexError("minibatch row index out of range");
  for (Index j : mb.cols)
    if (j < 0 || j >= m) throw IndexError("minibatch column index out of range");
}

}  // namespace

GradientPair minibatch_gradients(const FactorizationState& state, const ResponseMatrix& data,
                                 const CovariateSet& covs, const FamilySpec& fam,
                                 const LinkSpec& link, const PenaltyConfig& penalty,
                                 const Minibatch& mb) {
  check_minibatch(mb, data.rows(), data.cols());
  const EntryBlock entries = entry_derivatives(state, data, covs, fam, link, mb.rows, mb.cols);
  return assemble_gradients(state, covs, penalty, mb, entries);
}

GradientPair full_gradients(const FactorizationState& state, const ResponseMatrix& data,
                            const CovariateSet& covs, const FamilySpec& fam,
                            const LinkSpec& link, const PenaltyConfig& penalty) {
  check_shapes(state, data, covs);
  return minibatch_gradients(state, data, covs, fam, link, penalty,
                             Minibatch::full(data.rows(), data.cols()));
}

}  // namespace gmfkit
