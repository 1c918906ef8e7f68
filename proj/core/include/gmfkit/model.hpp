#pragma once

// Data containers, the linear predictor and the penalized objective.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "gmfkit/family.hpp"

namespace gmfkit {

using Index = Eigen::Index;
using IndexSet = std::vector<Index>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Observed data Y with observation mask (true = observed) and prior weights.
class ResponseMatrix {
 public:
  ResponseMatrix() = default;
  /// Fully observed, unit weights.
  explicit ResponseMatrix(Matrix values);
  ResponseMatrix(Matrix values, Mask mask);
  ResponseMatrix(Matrix values, Mask mask, Matrix weights);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  const Matrix& values() const { return values_; }
  const Mask& mask() const { return mask_; }
  const Matrix& weights() const { return weights_; }

  bool observed(Index i, Index j) const { return mask_(i, j); }
  /// True when the entry enters derivative computations: observed entries,
  /// plus unobserved ones in a working copy that carries imputed values.
  bool participates(Index i, Index j) const { return imputing_ || mask_(i, j); }
  bool imputing() const { return imputing_; }
  double value(Index i, Index j) const { return values_(i, j); }
  double weight(Index i, Index j) const { return weights_(i, j); }

  Index observed_count() const { return observed_count_; }
  bool fully_observed() const { return observed_count_ == mask_.size(); }

  /// Copy with the same values and weights but a different mask.
  ResponseMatrix with_mask(Mask mask) const;

  /// Working copy whose unobserved entries hold `fill` and take part in
  /// derivative computations. The mask is unchanged, so objectives and
  /// metrics still run over the observed entries only.
  ResponseMatrix working_copy(const Matrix& fill) const;

  /// Rows and columns reordered (out(a, b) = this(rows[a], cols[b])); the
  /// imputation flag is kept.
  ResponseMatrix permuted(const std::vector<Index>& rows, const std::vector<Index>& cols) const;

  /// Overwrite an unobserved entry (imputation). Observed entries are
  /// immutable; writing one throws IndexError.
  void set_missing_value(Index i, Index j, double value);

 private:
  void validate();

  Matrix values_;
  Mask mask_;
  Matrix weights_;
  bool imputing_ = false;
  Index observed_count_ = 0;
};

/// Row design X (n x p) and column design Z (m x q). Either may have zero
/// columns.
struct CovariateSet {
  Matrix x;
  Matrix z;

  static CovariateSet none(Index n, Index m) { return {Matrix(n, 0), Matrix(m, 0)}; }
  /// X = 1_n, no column design.
  static CovariateSet intercept(Index n, Index m) {
    return {Matrix::Ones(n, 1), Matrix(m, 0)};
  }

  Index p() const { return x.cols(); }
  Index q() const { return z.cols(); }
};

/// Parameters (B, Gamma, U, V) with dispersion phi and negative binomial shape.
struct FactorizationState {
  Matrix b;      // m x p
  Matrix gamma;  // n x q
  Matrix u;      // n x d
  Matrix v;      // m x d
  double phi = 1.0;
  double nb_shape = 1.0;

  static FactorizationState zeros(Index n, Index m, Index p, Index q, Index d);

  Index rank() const { return u.cols(); }
  Index n() const { return u.rows(); }
  Index m() const { return v.rows(); }
};

enum class Block { B = 0, Gamma = 1, U = 2, V = 3 };

/// Ridge penalty lambda * multiplier[block] on each parameter block.
struct PenaltyConfig {
  double lambda = 1.0;
  std::array<double, 4> multipliers{0.0, 0.0, 1.0, 1.0};

  double weight(Block block) const { return lambda * multipliers[static_cast<int>(block)]; }
  void validate() const;
};

/// Throws ConfigError/IndexError when shapes disagree.
void check_shapes(const FactorizationState& state, const ResponseMatrix& data,
                  const CovariateSet& covs);
void check_shapes(const FactorizationState& state, const CovariateSet& covs);

/// FamilySpec with the negative binomial shape taken from the state.
FamilySpec effective_family(const FamilySpec& fam, const FactorizationState& state);

IndexSet all_indices(Index count);

/// [a, b] side by side; either may have zero columns.
template <typename A, typename B>
Matrix hcat(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  if (a.cols() > 0) out.leftCols(a.cols()) = a;
  if (b.cols() > 0) out.rightCols(b.cols()) = b;
  return out;
}

/// eta_ij = x_i b_j + gamma_i z_j + u_i v_j on the requested block.
Matrix linear_predictor(const FactorizationState& state, const CovariateSet& covs,
                        const IndexSet& rows, const IndexSet& cols);
Matrix linear_predictor(const FactorizationState& state, const CovariateSet& covs);

/// g^{-1}(eta) over the whole matrix.
Matrix fitted_means(const FactorizationState& state, const CovariateSet& covs,
                    const LinkSpec& link);

/// Sum over observed entries of D(y, mu) / (2 phi) plus the block ridge
/// penalties. Equals the negative log-likelihood up to a term that depends
/// on (y, phi) only.
double penalized_objective(const FactorizationState& state, const ResponseMatrix& data,
                           const CovariateSet& covs, const FamilySpec& fam,
                           const LinkSpec& link, const PenaltyConfig& penalty);

/// Penalized objective restricted to a list of observed entries (row, col).
/// Used for subsampled convergence checks; the data term is rescaled by
/// |Omega| / |entries| and the penalty is added in full.
double penalized_objective_sampled(const FactorizationState& state, const ResponseMatrix& data,
                                   const CovariateSet& covs, const FamilySpec& fam,
                                   const LinkSpec& link, const PenaltyConfig& penalty,
                                   const std::vector<std::pair<Index, Index>>& entries);

double penalty_value(const FactorizationState& state, const PenaltyConfig& penalty);

/// Total deviance sum_{Omega} D(y, mu).
double total_deviance(const FactorizationState& state, const ResponseMatrix& data,
                      const CovariateSet& covs, const FamilySpec& fam, const LinkSpec& link);

/// p m + q n + d (n + m) + 1.
std::int64_t parameter_count(std::int64_t n, std::int64_t m, std::int64_t p, std::int64_t q,
                             std::int64_t d);

}  // namespace gmfkit
