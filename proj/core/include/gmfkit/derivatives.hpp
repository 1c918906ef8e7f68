#pragma once

// Gradient and diagonal Hessian assembly for the penalized objective.
//
// Row-side blocks stack [Gamma, U] (q + d columns), column-side blocks stack
// [B, V] (p + d columns). The data part uses the per-entry derivatives
// dot_d / ddot_d (Fisher form); the penalty part adds lambda_k * theta and
// lambda_k on the diagonal.
//
// Reduction order: the per-entry derivative matrices are filled column by
// column (optionally in parallel, each entry written once), then combined by
// single-threaded dense products. Results are therefore bitwise identical for
// any thread count.

#include "gmfkit/model.hpp"

namespace gmfkit {

struct Minibatch {
  IndexSet rows;
  IndexSet cols;

  static Minibatch full(Index n, Index m) { return {all_indices(n), all_indices(m)}; }
};

struct GradientPair {
  Matrix g_row;  // |rows| x (q + d)
  Matrix h_row;
  Matrix g_col;  // |cols| x (p + d)
  Matrix h_col;
};

/// Per-entry first and second derivatives on a block. Unobserved entries
/// have zero derivative. `mu` holds the clamped means.
struct EntryBlock {
  Matrix mu;
  Matrix dot;
  Matrix ddot;
};

EntryBlock entry_derivatives(const FactorizationState& state, const ResponseMatrix& data,
                             const CovariateSet& covs, const FamilySpec& fam,
                             const LinkSpec& link, const IndexSet& rows, const IndexSet& cols);

/// Stacked row-side parameters [Gamma, U] and column-side [B, V].
Matrix row_params(const FactorizationState& state);
Matrix col_params(const FactorizationState& state);
void set_row_params(FactorizationState& state, const IndexSet& rows, const Matrix& values);
void set_col_params(FactorizationState& state, const IndexSet& cols, const Matrix& values);

/// Per-column penalty weights for the stacked blocks.
Vector row_penalty(const PenaltyConfig& penalty, Index q, Index d);
Vector col_penalty(const PenaltyConfig& penalty, Index p, Index d);

/// Exact gradient and Fisher diagonal over all rows and columns.
GradientPair full_gradients(const FactorizationState& state, const ResponseMatrix& data,
                            const CovariateSet& covs, const FamilySpec& fam,
                            const LinkSpec& link, const PenaltyConfig& penalty);

/// Unbiased block estimate: data parts scaled by m/|J| (row side) and
/// n/|I| (column side). Allocation is O(|I| |J|).
GradientPair minibatch_gradients(const FactorizationState& state, const ResponseMatrix& data,
                                 const CovariateSet& covs, const FamilySpec& fam,
                                 const LinkSpec& link, const PenaltyConfig& penalty,
                                 const Minibatch& mb);

/// Assemble gradients from precomputed entry derivatives on block mb.
GradientPair assemble_gradients(const FactorizationState& state, const CovariateSet& covs,
                                const PenaltyConfig& penalty, const Minibatch& mb,
                                const EntryBlock& entries);

}  // namespace gmfkit
