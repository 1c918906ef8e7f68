#include "gmfkit/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "gmfkit/errors.hpp"
#include "gmfkit/linalg.hpp"
#include "gmfkit/metrics.hpp"
#include "gmfkit/parallel.hpp"
#include "gmfkit/simulate.hpp"

namespace gmfkit {

namespace {

constexpr int kMaxHoldoutDraws = 100;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dispersion_for(const FamilySpec& fam, const FactorizationState& state) {
  return has_free_dispersion(fam.kind) ? state.phi : 1.0;
}

bool lines_covered(const Mask& mask, const Mask& original) {
  for (Index i = 0; i < mask.rows(); ++i)
    if (original.row(i).any() && !mask.row(i).any()) return false;
  for (Index j = 0; j < mask.cols(); ++j)
    if (original.col(j).any() && !mask.col(j).any()) return false;
  return true;
}

// Appends `extra` columns of N(0, scale^2) to U and V.
FactorizationState pad_state(FactorizationState s, Index extra, double scale,
                             std::uint64_t seed) {
  if (extra <= 0) return s;
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, scale);
  const Index d = s.rank();
  Matrix u(s.n(), d + extra);
  Matrix v(s.m(), d + extra);
  u.leftCols(d) = s.u;
  v.leftCols(d) = s.v;
  for (Index k = d; k < d + extra; ++k) {
    for (Index i = 0; i < s.n(); ++i) u(i, k) = normal(rng);
    for (Index j = 0; j < s.m(); ++j) v(j, k) = normal(rng);
  }
  s.u = std::move(u);
  s.v = std::move(v);
  return s;
}

struct HeldOutScore {
  double deviance = 0.0;
  double baseline = 0.0;
};

HeldOutScore score_holdout(const FactorizationState& state, const ResponseMatrix& data,
                           const CovariateSet& covs, const FamilySpec& fam,
                           const LinkSpec& link, const EntryList& test, double ybar) {
  const FamilySpec f = effective_family(fam, state);
  const Matrix eta = linear_predictor(state, covs);
  const double base = clamp_mean(f, ybar);
  HeldOutScore out;
  for (const auto& [i, j] : test) {
    const double mu = clamp_mean(f, link_inverse(link, eta(i, j)));
    const double y = data.value(i, j);
    const double w = data.weight(i, j);
    out.deviance += unit_deviance(f, y, mu, w);
    out.baseline += unit_deviance(f, y, base, w);
  }
  return out;
}

double mean_of_finite(const std::vector<double>& xs) {
  double total = 0.0;
  int count = 0;
  for (double x : xs)
    if (std::isfinite(x)) {
      total += x;
      ++count;
    }
  return count > 0 ? total / count : kNaN;
}

}  // namespace

InformationCriteria information_criteria(const FactorizationState& state,
                                         const ResponseMatrix& data, const CovariateSet& covs,
                                         const FamilySpec& fam, const LinkSpec& link) {
  check_shapes(state, data, covs);
  const FamilySpec f = effective_family(fam, state);
  const double phi = dispersion_for(fam, state);
  const Matrix eta = linear_predictor(state, covs);
  InformationCriteria out;
  double saturated = 0.0;
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i) {
      if (!data.observed(i, j)) continue;
      const double y = data.value(i, j);
      const double w = data.weight(i, j);
      const double mu = clamp_mean(f, link_inverse(link, eta(i, j)));
      out.deviance += unit_deviance(f, y, mu, w);
      saturated += saturated_loglik(f, y, w, phi);
    }
  out.k = parameter_count(state.n(), state.m(), state.b.cols(), state.gamma.cols(),
                          state.rank());
  out.neg2_loglik = out.deviance / phi - 2.0 * saturated;
  const double k = static_cast<double>(out.k);
  out.aic = out.neg2_loglik + 2.0 * k;
  out.bic = out.neg2_loglik + k * std::log(static_cast<double>(data.observed_count()));
  return out;
}

Holdout holdout_mask(const ResponseMatrix& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("holdout fraction must lie in (0, 1)");
  EntryList observed;
  observed.reserve(static_cast<std::size_t>(data.observed_count()));
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i)
      if (data.observed(i, j)) observed.emplace_back(i, j);
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(observed.size()) + 1e-9));
  if (count == 0) return {data, {}};

  std::vector<std::size_t> order(observed.size());
  for (int attempt = 0; attempt < kMaxHoldoutDraws; ++attempt) {
    std::mt19937_64 rng(splitmix64(seed + static_cast<std::uint64_t>(attempt)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < count; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
      std::swap(order[k], order[pick(rng)]);
    }
    std::vector<std::size_t> chosen(order.begin(),
                                    order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(chosen.begin(), chosen.end());
    Mask mask = data.mask();
    EntryList test;
    test.reserve(count);
    for (std::size_t k : chosen) {
      mask(observed[k].first, observed[k].second) = false;
      test.push_back(observed[k]);
    }
    if (!lines_covered(mask, data.mask())) continue;
    return {data.with_mask(std::move(mask)), std::move(test)};
  }
  throw ConfigError("holdout leaves a row or column without observed entries after " +
                    std::to_string(kMaxHoldoutDraws) + " draws");
}

RankSelectionReport cv_rank_select(const ResponseMatrix& data, const CovariateSet& covs,
                                   const FamilySpec& fam, const LinkSpec& link,
                                   std::vector<Index> ranks, const CvOptions& opts) {
  if (opts.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (ranks.empty()) throw ConfigError("no candidate ranks");
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
  const Index max_d = std::min(data.rows(), data.cols());
  for (Index d : ranks)
    if (d < 0 || d > max_d) throw ConfigError("candidate rank outside [0, min(n, m)]");
  if (!(opts.pad_scale >= 0.0)) throw ConfigError("pad_scale must be non-negative");

  const std::size_t nr = ranks.size();
  const auto nf = static_cast<std::size_t>(opts.folds);
  RankSelectionReport rep;
  rep.ranks = ranks;
  rep.folds = opts.folds;
  rep.cv_deviance.assign(nr, std::vector<double>(nf, kNaN));
  rep.cv_rel_deviance.assign(nr, std::vector<double>(nf, kNaN));
  std::vector<CvCell> cells(nr * nf);

  // Masks are drawn up front so that they do not depend on scheduling.
  std::vector<Holdout> holdouts;
  holdouts.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f)
    holdouts.push_back(holdout_mask(data, opts.holdout_fraction,
                                    splitmix64(opts.seed ^ splitmix64(f + 1))));

  parallel_for(
      0, static_cast<std::ptrdiff_t>(nf),
      [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
        for (std::ptrdiff_t f = lo; f < hi; ++f) {
          const Holdout& ho = holdouts[static_cast<std::size_t>(f)];
          const double ybar = observed_mean(ho.train);
          std::optional<FactorizationState> prev;
          for (std::size_t r = 0; r < nr; ++r) {
            const Index d = ranks[r];
            CvCell& cell = cells[r * nf + static_cast<std::size_t>(f)];
            cell.rank = d;
            cell.fold = static_cast<int>(f);
            try {
              FactorizationState start;
              if (opts.warm_start && prev) {
                start = pad_state(*prev, d - prev->rank(), opts.pad_scale,
                                  opts.seed ^ splitmix64(static_cast<std::uint64_t>(f) * 1000003u +
                                                         static_cast<std::uint64_t>(d)));
              } else {
                start = initialize(ho.train, covs, fam, link, d, opts.init).state;
              }
              FitResult fit = fit_model(ho.train, covs, fam, link, opts.penalty, opts.fit, start);
              const HeldOutScore sc =
                  score_holdout(fit.state, data, covs, fam, link, ho.test, ybar);
              if (!std::isfinite(sc.deviance)) throw DomainError("non-finite held-out deviance");
              cell.deviance = sc.deviance;
              cell.rel_deviance = sc.baseline > 0.0 ? sc.deviance / sc.baseline : kNaN;
              cell.epochs = fit.report.epochs_run;
              cell.converged = fit.report.converged;
              prev = std::move(fit.state);
            } catch (const ConfigError&) {
              throw;
            } catch (const Error& e) {
              cell.failed = true;
              cell.error = e.what();
              prev.reset();
            }
          }
        }
      },
      1);

  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t f = 0; f < nf; ++f) {
      const CvCell& cell = cells[r * nf + f];
      if (cell.failed) {
        ++rep.failed_cells;
        continue;
      }
      rep.cv_deviance[r][f] = cell.deviance;
      rep.cv_rel_deviance[r][f] = cell.rel_deviance;
    }
  rep.cells = std::move(cells);
  for (std::size_t r = 0; r < nr; ++r) {
    rep.cv_mean.push_back(mean_of_finite(rep.cv_deviance[r]));
    rep.cv_rel_mean.push_back(mean_of_finite(rep.cv_rel_deviance[r]));
  }
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < nr; ++r)
    if (std::isfinite(rep.cv_mean[r]) && (!best || rep.cv_mean[r] < rep.cv_mean[*best])) best = r;
  if (best) rep.chosen["cv"] = ranks[*best];

  if (opts.information_criteria) {
    std::optional<FactorizationState> prev;
    std::optional<std::size_t> best_aic;
    std::optional<std::size_t> best_bic;
    for (std::size_t r = 0; r < nr; ++r) {
      const Index d = ranks[r];
      double aic = kNaN;
      double bic = kNaN;
      try {
        FactorizationState start =
            opts.warm_start && prev
                ? pad_state(*prev, d - prev->rank(), opts.pad_scale,
                            opts.seed ^ splitmix64(static_cast<std::uint64_t>(d) + 7919u))
                : initialize(data, covs, fam, link, d, opts.init).state;
        FitResult fit = fit_model(data, covs, fam, link, opts.penalty, opts.fit, start);
        const InformationCriteria ic = information_criteria(fit.state, data, covs, fam, link);
        aic = ic.aic;
        bic = ic.bic;
        prev = std::move(fit.state);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error&) {
        prev.reset();
      }
      rep.aic.push_back(aic);
      rep.bic.push_back(bic);
      if (std::isfinite(aic) && (!best_aic || aic < rep.aic[*best_aic])) best_aic = r;
      if (std::isfinite(bic) && (!best_bic || bic < rep.bic[*best_bic])) best_bic = r;
    }
    if (best_aic) rep.chosen["aic"] = ranks[*best_aic];
    if (best_bic) rep.chosen["bic"] = ranks[*best_bic];
  }

  if (opts.scree_max_rank > 0) {
    rep.scree_eigenvalues = scree_eigenvalues(data, covs, opts.scree_max_rank);
    const ElbowPick pick = elbow_pick(rep.scree_eigenvalues);
    rep.scree_ambiguous = pick.ambiguous;
    rep.scree_warning = pick.warning;
    rep.chosen["scree"] = pick.rank;
  }
  return rep;
}

Matrix log_residuals(const ResponseMatrix& data, const CovariateSet& covs) {
  if (covs.x.rows() != data.rows() || covs.z.rows() != data.cols())
    throw ConfigError("covariates do not match the response matrix");
  Matrix y = Matrix::Zero(data.rows(), data.cols());
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i) {
      if (!data.observed(i, j)) continue;
      const double v = data.value(i, j);
      if (!(v > -1.0)) throw DomainError("log1p needs values above -1");
      y(i, j) = std::log1p(v);
    }
  return covariate_residuals(y, data.mask(), covs);
}

std::vector<double> scree_eigenvalues(const ResponseMatrix& data, const CovariateSet& covs,
                                      Index max_rank) {
  if (max_rank < 1 || max_rank > std::min(data.rows(), data.cols()))
    throw ConfigError("max_rank must lie in [1, min(n, m)]");
  const SvdResult svd = thin_svd(log_residuals(data, covs));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_rank));
  for (Index k = 0; k < max_rank; ++k) {
    const double s = k < svd.s.size() ? svd.s(k) : 0.0;
    out.push_back(s * s);
  }
  return out;
}

Matrix scree_scores(const ResponseMatrix& data, const CovariateSet& covs, Index k) {
  if (k < 1 || k > std::min(data.rows(), data.cols()))
    throw ConfigError("score rank must lie in [1, min(n, m)]");
  const SvdResult svd = thin_svd(log_residuals(data, covs));
  return svd.u.leftCols(k) * svd.s.head(k).asDiagonal();
}

ElbowPick elbow_pick(const std::vector<double>& eigenvalues) {
  if (eigenvalues.empty()) throw ConfigError("no eigenvalues");
  ElbowPick out;
  if (eigenvalues.size() == 1) {
    out.warning = true;
    return out;
  }
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < eigenvalues.size(); ++k) {
    const double a = eigenvalues[k];
    const double b = eigenvalues[k + 1];
    if (a < 0.0 || b < 0.0 || b > a * (1.0 + 1e-12) + 1e-300)
      throw ConfigError("eigenvalues must be non-negative and descending");
    if (b > 0.0)
      ratios.push_back(a / b);
    else
      ratios.push_back(a > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  }
  const auto it = std::max_element(ratios.begin(), ratios.end());
  out.rank = static_cast<Index>(it - ratios.begin()) + 1;
  if (ratios.size() >= 2) {
    const double first = ratios.front();
    out.ambiguous = std::all_of(ratios.begin(), ratios.end(), [&](double r) {
      return r == first || std::abs(r - first) <= 1e-9 * std::abs(first);
    });
    if (out.ambiguous) out.rank = 1;
  }
  return out;
}

}  // namespace gmfkit
