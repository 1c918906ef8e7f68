#include "gmfkit/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "gmfkit/errors.hpp"

namespace gmfkit {

ResponseMatrix::ResponseMatrix(Matrix values)
    : values_(std::move(values)),
      mask_(Mask::Constant(values_.rows(), values_.cols(), true)),
      weights_(Matrix::Ones(values_.rows(), values_.cols())) {
  validate();
}

ResponseMatrix::ResponseMatrix(Matrix values, Mask mask)
    : values_(std::move(values)),
      mask_(std::move(mask)),
      weights_(Matrix::Ones(values_.rows(), values_.cols())) {
  validate();
}

ResponseMatrix::ResponseMatrix(Matrix values, Mask mask, Matrix weights)
    : values_(std::move(values)), mask_(std::move(mask)), weights_(std::move(weights)) {
  validate();
}

void ResponseMatrix::validate() {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw ConfigError("response matrix must have at least one row and one column");
  if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
    throw ConfigError("mask shape does not match response matrix");
  if (weights_.rows() != values_.rows() || weights_.cols() != values_.cols())
    throw ConfigError("weight shape does not match response matrix");
  if (!(weights_.array() > 0.0).all()) throw ConfigError("weights must be strictly positive");
  observed_count_ = mask_.count();
}

ResponseMatrix ResponseMatrix::with_mask(Mask mask) const {
  return ResponseMatrix(values_, std::move(mask), weights_);
}

ResponseMatrix ResponseMatrix::working_copy(const Matrix& fill) const {
  if (fill.rows() != rows() || fill.cols() != cols())
    throw ConfigError("fill matrix shape does not match response matrix");
  ResponseMatrix out = *this;
  out.imputing_ = true;
  out.values_ = mask_.select(values_, fill);
  return out;
}

ResponseMatrix ResponseMatrix::permuted(const std::vector<Index>& rows,
                                        const std::vector<Index>& cols) const {
  ResponseMatrix out(values_(rows, cols), mask_(rows, cols), weights_(rows, cols));
  out.imputing_ = imputing_;
  return out;
}

void ResponseMatrix::set_missing_value(Index i, Index j, double value) {
  if (mask_(i, j)) throw IndexError("refusing to overwrite an observed entry");
  values_(i, j) = value;
}

FactorizationState FactorizationState::zeros(Index n, Index m, Index p, Index q, Index d) {
  FactorizationState s;
  s.b = Matrix::Zero(m, p);
  s.gamma = Matrix::Zero(n, q);
  s.u = Matrix::Zero(n, d);
  s.v = Matrix::Zero(m, d);
  return s;
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  for (double mult : multipliers)
    if (!(mult >= 0.0)) throw ConfigError("penalty multipliers must be non-negative");
}

void check_shapes(const FactorizationState& state, const CovariateSet& covs) {
  const Index n = covs.x.rows();
  const Index m = covs.z.rows();
  auto fail = [](const std::string& what) { throw ConfigError("shape mismatch: " + what); };
  if (state.b.rows() != m || state.b.cols() != covs.p()) fail("B must be m x p");
  if (state.gamma.rows() != n || state.gamma.cols() != covs.q()) fail("Gamma must be n x q");
  if (state.u.rows() != n) fail("U must have n rows");
  if (state.v.rows() != m) fail("V must have m rows");
  if (state.u.cols() != state.v.cols()) fail("U and V must share the rank");
  if (!(state.phi > 0.0)) throw ConfigError("dispersion must be positive");
}

void check_shapes(const FactorizationState& state, const ResponseMatrix& data,
                  const CovariateSet& covs) {
  if (covs.x.rows() != data.rows() || covs.z.rows() != data.cols())
    throw ConfigError("shape mismatch: covariates do not match the response matrix");
  check_shapes(state, covs);
}

FamilySpec effective_family(const FamilySpec& fam, const FactorizationState& state) {
  FamilySpec out = fam;
  if (fam.kind == FamilyKind::NegBinomial) out.nb_shape = state.nb_shape;
  return out;
}

IndexSet all_indices(Index count) {
  IndexSet idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

namespace {

void check_range(const IndexSet& idx, Index bound, const char* what) {
  for (Index k : idx) {
    if (k < 0 || k >= bound) {
      std::ostringstream os;
      os << what << " index " << k << " out of range [0, " << bound << ")";
      throw IndexError(os.str());
    }
  }
}

}  // namespace

Matrix linear_predictor(const FactorizationState& state, const CovariateSet& covs,
                        const IndexSet& rows, const IndexSet& cols) {
  check_shapes(state, covs);
  check_range(rows, state.u.rows(), "row");
  check_range(cols, state.v.rows(), "column");
  Matrix eta = state.u(rows, Eigen::all) * state.v(cols, Eigen::all).transpose();
  if (covs.p() > 0) eta.noalias() += covs.x(rows, Eigen::all) * state.b(cols, Eigen::all).transpose();
  if (covs.q() > 0)
    eta.noalias() += state.gamma(rows, Eigen::all) * covs.z(cols, Eigen::all).transpose();
  return eta;
}

Matrix linear_predictor(const FactorizationState& state, const CovariateSet& covs) {
  check_shapes(state, covs);
  Matrix eta = state.u * state.v.transpose();
  if (covs.p() > 0) eta.noalias() += covs.x * state.b.transpose();
  if (covs.q() > 0) eta.noalias() += state.gamma * covs.z.transpose();
  return eta;
}

Matrix fitted_means(const FactorizationState& state, const CovariateSet& covs,
                    const LinkSpec& link) {
  Matrix eta = linear_predictor(state, covs);
  return eta.unaryExpr([&](double e) { return link_inverse(link, e); });
}

double penalty_value(const FactorizationState& state, const PenaltyConfig& penalty) {
  return 0.5 * (penalty.weight(Block::B) * state.b.squaredNorm() +
                penalty.weight(Block::Gamma) * state.gamma.squaredNorm() +
                penalty.weight(Block::U) * state.u.squaredNorm() +
                penalty.weight(Block::V) * state.v.squaredNorm());
}

double total_deviance(const FactorizationState& state, const ResponseMatrix& data,
                      const CovariateSet& covs, const FamilySpec& fam, const LinkSpec& link) {
  check_shapes(state, data, covs);
  const FamilySpec f = effective_family(fam, state);
  const Matrix eta = linear_predictor(state, covs);
  double total = 0.0;
  for (Index j = 0; j < data.cols(); ++j) {
    for (Index i = 0; i < data.rows(); ++i) {
      if (!data.observed(i, j)) continue;
      const double mu = clamp_mean(f, link_inverse(link, eta(i, j)));
      total += unit_deviance(f, data.value(i, j), mu, data.weight(i, j));
    }
  }
  return total;
}

double penalized_objective(const FactorizationState& state, const ResponseMatrix& data,
                           const CovariateSet& covs, const FamilySpec& fam,
                           const LinkSpec& link, const PenaltyConfig& penalty) {
  const double dev = total_deviance(state, data, covs, fam, link);
  return dev / (2.0 * state.phi) + penalty_value(state, penalty);
}

double penalized_objective_sampled(const FactorizationState& state, const ResponseMatrix& data,
                                   const CovariateSet& covs, const FamilySpec& fam,
                                   const LinkSpec& link, const PenaltyConfig& penalty,
                                   const std::vector<std::pair<Index, Index>>& entries) {
  if (entries.empty()) return penalty_value(state, penalty);
  const FamilySpec f = effective_family(fam, state);
  const Index p = covs.p();
  const Index q = covs.q();
  double dev = 0.0;
  for (const auto& [i, j] : entries) {
    double eta = state.u.row(i).dot(state.v.row(j));
    if (p > 0) eta += covs.x.row(i).dot(state.b.row(j));
    if (q > 0) eta += state.gamma.row(i).dot(covs.z.row(j));
    const double mu = clamp_mean(f, link_inverse(link, eta));
    dev += unit_deviance(f, data.value(i, j), mu, data.weight(i, j));
  }
  const double scale =
      static_cast<double>(data.observed_count()) / static_cast<double>(entries.size());
  return scale * dev / (2.0 * state.phi) + penalty_value(state, penalty);
}

std::int64_t parameter_count(std::int64_t n, std::int64_t m, std::int64_t p, std::int64_t q,
                             std::int64_t d) {
  return p * m + q * n + d * (n + m) + 1;
}

}  // namespace gmfkit
