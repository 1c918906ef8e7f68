#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace oracle {

double inverse_link(LinkKind link, double eta) {
  switch (link) {
    case LinkKind::Identity: return eta;
    case LinkKind::Log: return std::exp(eta);
    case LinkKind::Logit: return 1.0 / (1.0 + std::exp(-eta));
    case LinkKind::Inverse: return 1.0 / eta;
    case LinkKind::InverseSquared: return 1.0 / std::sqrt(eta);
  }
  throw std::logic_error("link");
}

namespace {

double xlogx_ratio(double y, double mu) { return y > 0.0 ? y * std::log(y / mu) : 0.0; }

}  // namespace

double unit_deviance(FamilyKind family, double y, double mu, double nb_shape) {
  switch (family) {
    case FamilyKind::Gaussian: return (y - mu) * (y - mu);
    case FamilyKind::Gamma: return 2.0 * (-std::log(y / mu) + (y - mu) / mu);
    case FamilyKind::InverseGaussian: return (y - mu) * (y - mu) / (mu * mu * y);
    case FamilyKind::Poisson: return 2.0 * (xlogx_ratio(y, mu) - (y - mu));
    case FamilyKind::Bernoulli:
      return 2.0 * (xlogx_ratio(y, mu) + xlogx_ratio(1.0 - y, 1.0 - mu));
    case FamilyKind::NegBinomial: {
      const double a = nb_shape;
      return 2.0 * (xlogx_ratio(y, mu) - (y + a) * std::log((y + a) / (mu + a)));
    }
  }
  throw std::logic_error("family");
}

double nb_logpmf(double y, double mu, double shape) {
  return std::lgamma(y + shape) - std::lgamma(shape) - std::lgamma(y + 1.0) +
         shape * std::log(shape / (shape + mu)) + (y > 0.0 ? y * std::log(mu / (shape + mu)) : 0.0);
}

double poisson_logpmf(double y, double mu) {
  return (y > 0.0 ? y * std::log(mu) : 0.0) - mu - std::lgamma(y + 1.0);
}

double objective(const FactorizationState& s, const ResponseMatrix& data, const CovariateSet& covs,
                 const FamilySpec& fam, const LinkSpec& link, const PenaltyConfig& penalty) {
  const Index n = data.rows();
  const Index m = data.cols();
  double dev = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (!data.observed(i, j)) continue;
      double eta = 0.0;
      for (Index k = 0; k < covs.x.cols(); ++k) eta += covs.x(i, k) * s.b(j, k);
      for (Index k = 0; k < covs.z.cols(); ++k) eta += s.gamma(i, k) * covs.z(j, k);
      for (Index k = 0; k < s.u.cols(); ++k) eta += s.u(i, k) * s.v(j, k);
      const double mu = inverse_link(link.kind, eta);
      dev += data.weight(i, j) * unit_deviance(fam.kind, data.value(i, j), mu, s.nb_shape);
    }
  }
  auto sq = [](const Matrix& a) {
    double t = 0.0;
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) t += a(i, j) * a(i, j);
    return t;
  };
  const double pen = penalty.lambda * (penalty.multipliers[0] * sq(s.b) +
                                       penalty.multipliers[1] * sq(s.gamma) +
                                       penalty.multipliers[2] * sq(s.u) +
                                       penalty.multipliers[3] * sq(s.v));
  return dev / (2.0 * s.phi) + 0.5 * pen;
}

Instance random_instance(const FamilySpec& fam, const LinkSpec& link, Index n, Index m, Index d,
                         Index p, Index q, double missing, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto g = [&](double sd) { return sd * normal(rng); };

  // Baseline linear predictor keeping the means in the domain.
  double base = 0.0;
  switch (link.kind) {
    case LinkKind::Identity: base = fam.kind == FamilyKind::Gaussian ? 0.0 : 3.0; break;
    case LinkKind::Log: base = 0.5; break;
    case LinkKind::Logit: base = 0.0; break;
    case LinkKind::Inverse:
    case LinkKind::InverseSquared: base = 2.0; break;
  }

  Instance out;
  out.covs.x = Matrix(n, p);
  out.covs.z = Matrix(m, q);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < p; ++k) out.covs.x(i, k) = k == 0 ? 1.0 : g(1.0);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < q; ++k) out.covs.z(j, k) = g(1.0);

  FactorizationState& s = out.state;
  s = FactorizationState::zeros(n, m, p, q, d);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < p; ++k) s.b(j, k) = (k == 0 ? base : 0.0) + g(0.15);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < q; ++k) s.gamma(i, k) = g(0.15);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) s.u(i, k) = g(0.3);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < d; ++k) s.v(j, k) = g(0.3);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  s.phi = gmfkit::has_free_dispersion(fam.kind) ? unif(rng) : 1.0;
  s.nb_shape = fam.kind == FamilyKind::NegBinomial ? unif(rng) : 1.0;

  Matrix y(n, m);
  Matrix w(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      double eta = 0.0;
      for (Index k = 0; k < p; ++k) eta += out.covs.x(i, k) * s.b(j, k);
      for (Index k = 0; k < q; ++k) eta += s.gamma(i, k) * out.covs.z(j, k);
      for (Index k = 0; k < d; ++k) eta += s.u(i, k) * s.v(j, k);
      const double mu = inverse_link(link.kind, eta);
      switch (fam.kind) {
        case FamilyKind::Gaussian: y(i, j) = mu + g(0.5); break;
        case FamilyKind::Gamma:
        case FamilyKind::InverseGaussian: y(i, j) = mu * std::exp(g(0.3)); break;
        case FamilyKind::Poisson:
        case FamilyKind::NegBinomial: {
          std::poisson_distribution<int> pois(mu);
          y(i, j) = pois(rng);
          break;
        }
        case FamilyKind::Bernoulli: {
          std::bernoulli_distribution bern(mu);
          y(i, j) = bern(rng) ? 1.0 : 0.0;
          break;
        }
      }
      w(i, j) = unif(rng);
    }
  }

  gmfkit::Mask mask = gmfkit::Mask::Constant(n, m, true);
  const auto holes = static_cast<Index>(std::floor(missing * static_cast<double>(n * m)));
  std::vector<Index> cells(static_cast<std::size_t>(n * m));
  std::iota(cells.begin(), cells.end(), Index{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  for (Index k = 0; k < holes; ++k) {
    const Index c = cells[static_cast<std::size_t>(k)];
    mask(c % n, c / n) = false;
  }
  out.data = ResponseMatrix(y, mask, w);
  return out;
}

std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts) {
  const Index n = points.rows();
  if (n < k) throw std::invalid_argument("fewer points than clusters");
  std::mt19937_64 rng(seed);
  std::vector<int> best;
  double best_wss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Matrix centers(k, points.cols());
    std::uniform_int_distribution<Index> first(0, n - 1);
    centers.row(0) = points.row(first(rng));
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int c = 1; c < k; ++c) {
      for (Index i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (int e = 0; e < c; ++e)
          dmin = std::min(dmin, (points.row(i) - centers.row(e)).squaredNorm());
        dist[static_cast<std::size_t>(i)] = dmin;
      }
      std::discrete_distribution<Index> pick(dist.begin(), dist.end());
      centers.row(c) = points.row(pick(rng));
    }
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    double wss = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      wss = 0.0;
      for (Index i = 0; i < n; ++i) {
        int arg = 0;
        double dmin = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double dd = (points.row(i) - centers.row(c)).squaredNorm();
          if (dd < dmin) {
            dmin = dd;
            arg = c;
          }
        }
        wss += dmin;
        if (label[static_cast<std::size_t>(i)] != arg) {
          label[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      Matrix sum = Matrix::Zero(k, points.cols());
      std::vector<int> count(static_cast<std::size_t>(k), 0);
      for (Index i = 0; i < n; ++i) {
        sum.row(label[static_cast<std::size_t>(i)]) += points.row(i);
        ++count[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
      }
      for (int c = 0; c < k; ++c)
        if (count[static_cast<std::size_t>(c)] > 0)
          centers.row(c) = sum.row(c) / count[static_cast<std::size_t>(c)];
    }
    if (wss < best_wss) {
      best_wss = wss;
      best = label;
    }
  }
  return best;
}

double permutation_accuracy(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
  if (truth.size() != pred.size() || truth.empty()) throw std::invalid_argument("labels");
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (perm[static_cast<std::size_t>(pred[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace oracle
