#include "gmfkit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fit_loop.hpp"

namespace gmfkit {

bool FitControls::dispersion_enabled(const FamilySpec& fam) const {
  if (estimate_dispersion) return *estimate_dispersion;
  return has_free_dispersion(fam.kind);
}

namespace {

void validate_controls(const FitControls& c) {
  if (!(c.damping >= 0.0)) throw ConfigError("damping must be non-negative");
  if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
  if (c.nafill_every < 0) throw ConfigError("nafill_every must be non-negative");
  if (!(c.nb_shape_floor > 0.0)) throw ConfigError("nb_shape_floor must be positive");
  if (!(c.nb_shape_max >= c.nb_shape_floor))
    throw ConfigError("nb_shape_max must not be below nb_shape_floor");
  if (!(c.phi_floor > 0.0)) throw ConfigError("phi_floor must be positive");
  if (c.objective_sample < 1) throw ConfigError("objective_sample must be positive");
}

}  // namespace

void SgdConfig::validate() const {
  validate_controls(*this);
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (!(rate_k0 > 0.0)) throw ConfigError("rate_k0 must be positive");
  if (!(rate_k1 >= 0.0)) throw ConfigError("rate_k1 must be non-negative");
  if (!(rate_tau > 0.5 && rate_tau <= 1.0)) throw ConfigError("rate_tau must lie in (0.5, 1]");
  if (mb_rows < 1 || mb_cols < 1) throw ConfigError("minibatch sizes must be positive");
  if (!(smooth_a1 > 0.0 && smooth_a1 <= 1.0)) throw ConfigError("smooth_a1 must lie in (0, 1]");
  if (!(smooth_a2 > 0.0 && smooth_a2 <= 1.0)) throw ConfigError("smooth_a2 must lie in (0, 1]");
}

void NewtonConfig::validate() const {
  validate_controls(*this);
  if (max_iter < 1) throw ConfigError("max_iter must be positive");
  if (!(stepsize > 0.0)) throw ConfigError("stepsize must be positive");
}

void AirwlsConfig::validate() const {
  validate_controls(*this);
  if (max_iter < 1) throw ConfigError("max_iter must be positive");
  if (nsteps < 1) throw ConfigError("nsteps must be positive");
  if (!(stepsize > 0.0 && stepsize <= 1.0)) throw ConfigError("stepsize must lie in (0, 1]");
}

std::string_view algorithm_name(Algorithm algo) {
  switch (algo) {
    case Algorithm::Asgd: return "asgd";
    case Algorithm::Newton: return "newton";
    case Algorithm::Airwls: return "airwls";
  }
  return "asgd";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "asgd" || name == "sgd") return Algorithm::Asgd;
  if (name == "newton") return Algorithm::Newton;
  if (name == "airwls") return Algorithm::Airwls;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

const FitControls& FitSettings::controls() const {
  switch (algorithm) {
    case Algorithm::Asgd: return sgd;
    case Algorithm::Newton: return newton;
    case Algorithm::Airwls: return airwls;
  }
  return sgd;
}

FitControls& FitSettings::controls() {
  return const_cast<FitControls&>(static_cast<const FitSettings&>(*this).controls());
}

FitResult fit_model(const ResponseMatrix& data, const CovariateSet& covs, const FamilySpec& fam,
                    const LinkSpec& link, const PenaltyConfig& penalty,
                    const FitSettings& settings, const FactorizationState& init) {
  switch (settings.algorithm) {
    case Algorithm::Asgd: return fit_asgd(data, covs, fam, link, penalty, settings.sgd, init);
    case Algorithm::Newton:
      return fit_newton(data, covs, fam, link, penalty, settings.newton, init);
    case Algorithm::Airwls:
      return fit_airwls(data, covs, fam, link, penalty, settings.airwls, init);
  }
  throw ConfigError("unknown algorithm");
}

double learning_rate(long t, const SgdConfig& cfg) {
  if (t < 0) throw ConfigError("iteration index must be non-negative");
  return cfg.rate_k0 /
         std::pow(1.0 + cfg.rate_k0 * cfg.rate_k1 * static_cast<double>(t), cfg.rate_tau);
}

Smoothed smooth_update(const Matrix& prev_g, const Matrix& prev_h, const Matrix& hat_g,
                       const Matrix& hat_h, double a1, double a2) {
  if (prev_g.rows() != hat_g.rows() || prev_g.cols() != hat_g.cols() ||
      prev_h.rows() != hat_h.rows() || prev_h.cols() != hat_h.cols())
    throw ConfigError("smoothing shapes do not match");
  return {(1.0 - a1) * prev_g + a1 * hat_g, (1.0 - a2) * prev_h + a2 * hat_h};
}

double bias_correction(long t, double a1, double a2) {
  if (t < 1) throw ConfigError("bias correction needs t >= 1");
  if (a1 == a2) return 1.0;
  const double td = static_cast<double>(t);
  return (1.0 - std::pow(a2, td)) / (1.0 - std::pow(a1, td));
}

namespace {

struct PearsonSum {
  double sum = 0.0;
  Index count = 0;
};

PearsonSum pearson_sum(const Matrix& mu, const ResponseMatrix& data, const Minibatch& mb,
                       const FamilySpec& fam) {
  PearsonSum out;
  for (std::size_t c = 0; c < mb.cols.size(); ++c) {
    const Index j = mb.cols[c];
    for (std::size_t r = 0; r < mb.rows.size(); ++r) {
      const Index i = mb.rows[r];
      if (!data.observed(i, j)) continue;
      const double m = mu(static_cast<Index>(r), static_cast<Index>(c));
      const double res = data.value(i, j) - m;
      out.sum += data.weight(i, j) * res * res / variance(fam, m);
      ++out.count;
    }
  }
  return out;
}

struct MomentSums {
  double num = 0.0;
  double den = 0.0;
  Index count = 0;
};

MomentSums nb_moment_sums(const Matrix& mu, const ResponseMatrix& data, const Minibatch& mb) {
  MomentSums out;
  for (std::size_t c = 0; c < mb.cols.size(); ++c) {
    const Index j = mb.cols[c];
    for (std::size_t r = 0; r < mb.rows.size(); ++r) {
      const Index i = mb.rows[r];
      if (!data.observed(i, j)) continue;
      const double m = mu(static_cast<Index>(r), static_cast<Index>(c));
      const double w = data.weight(i, j);
      const double res = data.value(i, j) - m;
      out.num += w * m * m;
      out.den += w * (res * res - m);
      ++out.count;
    }
  }
  return out;
}

Matrix block_means(const FactorizationState& state, const CovariateSet& covs,
                   const FamilySpec& fam, const LinkSpec& link, const Minibatch& mb) {
  const FamilySpec f = effective_family(fam, state);
  Matrix mu = linear_predictor(state, covs, mb.rows, mb.cols);
  return mu.unaryExpr([&](double e) { return clamp_mean(f, link_inverse(link, e)); });
}

double residual_dof(const ResponseMatrix& data, const FactorizationState& state) {
  const double k = static_cast<double>(parameter_count(state.n(), state.m(), state.b.cols(),
                                                       state.gamma.cols(), state.rank()));
  return static_cast<double>(data.observed_count()) - k;
}

}  // namespace

namespace detail {

// Internal entry points shared by the steppers; `mu` holds the block means.
double pearson_from_means(const FactorizationState& state, const ResponseMatrix& data,
                          const FamilySpec& fam, const Minibatch& mb, const Matrix& mu) {
  const double dof = residual_dof(data, state);
  if (!(dof > 0.0))
    throw ConfigError("model has at least as many parameters as observed entries");
  const PearsonSum ps = pearson_sum(mu, data, mb, effective_family(fam, state));
  if (ps.count == 0) return state.phi;
  const double scale =
      static_cast<double>(data.observed_count()) / static_cast<double>(ps.count);
  return scale * ps.sum / dof;
}

double nb_moment_from_means(const ResponseMatrix& data, const Minibatch& mb, const Matrix& mu,
                            double cap) {
  const MomentSums s = nb_moment_sums(mu, data, mb);
  if (s.count == 0 || !(s.den > 0.0)) return cap;
  return std::min(cap, s.num / s.den);
}

}  // namespace detail

double pearson_dispersion(const FactorizationState& state, const ResponseMatrix& data,
                          const CovariateSet& covs, const FamilySpec& fam, const LinkSpec& link,
                          const Minibatch& mb) {
  return detail::pearson_from_means(state, data, fam, mb, block_means(state, covs, fam, link, mb));
}

double update_dispersion_stochastic(const FactorizationState& state, const ResponseMatrix& data,
                                    const CovariateSet& covs, const FamilySpec& fam,
                                    const LinkSpec& link, const Minibatch& mb, double rate) {
  const double hat = pearson_dispersion(state, data, covs, fam, link, mb);
  return (1.0 - rate) * state.phi + rate * hat;
}

double nb_shape_moment(const FactorizationState& state, const ResponseMatrix& data,
                       const CovariateSet& covs, const LinkSpec& link, const Minibatch& mb,
                       double cap) {
  const FamilySpec nb(FamilyKind::NegBinomial, state.nb_shape);
  return detail::nb_moment_from_means(data, mb, block_means(state, covs, nb, link, mb), cap);
}

double update_nb_shape_stochastic(const FactorizationState& state, const ResponseMatrix& data,
                                  const CovariateSet& covs, const LinkSpec& link,
                                  const Minibatch& mb, double rate, double floor, double cap) {
  const double hat = nb_shape_moment(state, data, covs, link, mb, cap);
  return (1.0 - rate) * state.nb_shape + rate * std::max(floor, hat);
}

void impute_block(const FactorizationState& state, const CovariateSet& covs,
                  const FamilySpec& fam, const LinkSpec& link, ResponseMatrix& working,
                  const Minibatch& mb) {
  if (working.fully_observed()) return;
  bool any = false;
  for (Index j : mb.cols)
    for (Index i : mb.rows)
      if (!working.observed(i, j)) any = true;
  if (!any) return;
  const Matrix mu = block_means(state, covs, fam, link, mb);
  for (std::size_t c = 0; c < mb.cols.size(); ++c)
    for (std::size_t r = 0; r < mb.rows.size(); ++r)
      if (!working.observed(mb.rows[r], mb.cols[c]))
        working.set_missing_value(mb.rows[r], mb.cols[c],
                                  mu(static_cast<Index>(r), static_cast<Index>(c)));
}

std::vector<IndexSet> random_partition(Index count, Index blocks, std::mt19937_64& rng) {
  if (blocks < 1 || blocks > count) throw ConfigError("invalid number of partition blocks");
  IndexSet perm = all_indices(count);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (Index k = count - 1; k > 0; --k) {
    std::uniform_int_distribution<Index> pick(0, k);
    std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<IndexSet> out(static_cast<std::size_t>(blocks));
  Index offset = 0;
  for (Index b = 0; b < blocks; ++b) {
    const Index size = count / blocks + (b < count % blocks ? 1 : 0);
    IndexSet& part = out[static_cast<std::size_t>(b)];
    part.assign(perm.begin() + offset, perm.begin() + offset + size);
    std::sort(part.begin(), part.end());
    offset += size;
  }
  return out;
}

namespace detail {

ObjectiveMonitor::ObjectiveMonitor(const ResponseMatrix& data, const CovariateSet& covs,
                                   const FamilySpec& fam, const LinkSpec& link,
                                   const PenaltyConfig& penalty, Index sample_size,
                                   std::uint64_t seed)
    : data_(data), covs_(covs), fam_(fam), link_(link), penalty_(penalty) {
  exact_ = data.observed_count() <= sample_size;
  if (exact_) return;
  // Bernoulli thinning with a fixed stream, then truncation to the budget.
  std::mt19937_64 rng(seed ^ 0x6f626a656374ULL);
  const double keep = static_cast<double>(sample_size) / static_cast<double>(data.observed_count());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i)
      if (data.observed(i, j) && unif(rng) < keep) entries_.emplace_back(i, j);
  if (static_cast<Index>(entries_.size()) > sample_size)
    entries_.resize(static_cast<std::size_t>(sample_size));
}

double ObjectiveMonitor::operator()(const FactorizationState& state) const {
  if (exact_) return penalized_objective(state, data_, covs_, fam_, link_, penalty_);
  return penalized_objective_sampled(state, data_, covs_, fam_, link_, penalty_, entries_);
}

bool all_finite(const FactorizationState& s) {
  return s.b.allFinite() && s.gamma.allFinite() && s.u.allFinite() && s.v.allFinite() &&
         std::isfinite(s.phi) && std::isfinite(s.nb_shape);
}

ResponseMatrix make_working_copy(const ResponseMatrix& data, const FactorizationState& state,
                                 const CovariateSet& covs, const FamilySpec& fam,
                                 const LinkSpec& link) {
  if (data.fully_observed()) return data.working_copy(data.values());
  const FamilySpec f = effective_family(fam, state);
  Matrix fill = linear_predictor(state, covs);
  fill = fill.unaryExpr([&](double e) { return clamp_mean(f, link_inverse(link, e)); });
  return data.working_copy(fill);
}

}  // namespace detail

}  // namespace gmfkit
