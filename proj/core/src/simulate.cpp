#include "gmfkit/simulate.hpp"

#include <cmath>
#include <numeric>

#include "gmfkit/errors.hpp"
#include "gmfkit/parallel.hpp"

namespace gmfkit {

namespace {

constexpr double kMeanCeiling = 1e12;
constexpr int kMaxRescales = 60;

// Inverse Gaussian draw (Michael, Schucany and Haas transformation).
double inverse_gaussian(double mu, double shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double nu = normal(rng);
  const double y = nu * nu;
  const double x =
      mu + mu * mu * y / (2.0 * shape) -
      mu / (2.0 * shape) * std::sqrt(4.0 * mu * shape * y + mu * mu * y * y);
  return unif(rng) <= mu / (mu + x) ? x : mu * mu / x;
}

bool representable(const FamilySpec& fam, const LinkSpec& link, double eta) {
  double mu = 0.0;
  try {
    mu = link_inverse(link, eta);
    check_mean(fam, mu);
  } catch (const DomainError&) {
    return false;
  }
  return std::isfinite(mu) && std::abs(mu) <= kMeanCeiling;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double sample_response(const FamilySpec& fam, double mu, double phi, std::mt19937_64& rng) {
  switch (fam.kind) {
    case FamilyKind::Gaussian: {
      std::normal_distribution<double> normal(mu, std::sqrt(phi));
      return normal(rng);
    }
    case FamilyKind::Gamma: {
      std::gamma_distribution<double> gamma(1.0 / phi, mu * phi);
      return gamma(rng);
    }
    case FamilyKind::InverseGaussian: return inverse_gaussian(mu, 1.0 / phi, rng);
    case FamilyKind::Poisson: {
      std::poisson_distribution<long long> pois(mu);
      return static_cast<double>(pois(rng));
    }
    case FamilyKind::Bernoulli: {
      std::bernoulli_distribution bern(mu);
      return bern(rng) ? 1.0 : 0.0;
    }
    case FamilyKind::NegBinomial: {
      std::gamma_distribution<double> gamma(fam.nb_shape, mu / fam.nb_shape);
      const double rate = gamma(rng);
      if (!(rate > 0.0)) return 0.0;
      std::poisson_distribution<long long> pois(rate);
      return static_cast<double>(pois(rng));
    }
  }
  return mu;
}

void SimConfig::validate() const {
  if (n < 1 || m < 1) throw ConfigError("dimensions must be positive");
  if (d_true < 0) throw ConfigError("latent rank must be non-negative");
  if (n_groups < 1) throw ConfigError("n_groups must be positive");
  if (static_cast<int>(group_probs.size()) != n_groups)
    throw ConfigError("group_probs must have n_groups entries");
  double total = 0.0;
  for (double pr : group_probs) {
    if (!(pr >= 0.0)) throw ConfigError("group_probs must be non-negative");
    total += pr;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("group_probs must sum to 1");
  if (n_batches < 1) throw ConfigError("n_batches must be positive");
  if (!(batch_effect_scale >= 0.0) || !(libsize_log_sd >= 0.0) || !(intercept_sd >= 0.0) ||
      !(centroid_scale >= 0.0) || !(within_group_sd >= 0.0) || !(loading_sd >= 0.0))
    throw ConfigError("scales must be non-negative");
  if (!(phi > 0.0)) throw ConfigError("phi must be positive");
  if (family.kind == FamilyKind::NegBinomial && !(family.nb_shape > 0.0))
    throw ConfigError("negative binomial shape must be positive");
  if (!is_supported(family.kind, link.kind)) throw ConfigError("unsupported family/link pair");
}

SimConfig sim_preset(std::string_view name) {
  SimConfig cfg;
  if (name == "small") {
    cfg.n = 200;
    cfg.m = 50;
  } else if (name == "medium") {
    cfg.n = 1000;
    cfg.m = 100;
  } else if (name == "large") {
    cfg.n = 5000;
    cfg.m = 500;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return cfg;
}

SimData generate(const SimConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n;
  const Index m = cfg.m;
  const Index d = cfg.d_true;
  const Index p = cfg.n_batches;  // intercept + (n_batches - 1) indicators

  std::mt19937_64 master(splitmix64(cfg.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](double mean, double sd) { return mean + sd * normal(master); };

  Matrix centroids(cfg.n_groups, d);
  for (Index g = 0; g < centroids.rows(); ++g)
    for (Index k = 0; k < d; ++k) centroids(g, k) = draw(0.0, cfg.centroid_scale);

  FactorizationState truth = FactorizationState::zeros(n, m, p, 1, d);
  truth.phi = cfg.phi;
  truth.nb_shape = cfg.family.nb_shape;
  for (Index j = 0; j < m; ++j) {
    truth.b(j, 0) = draw(cfg.intercept_mean, cfg.intercept_sd);
    for (Index k = 1; k < p; ++k) truth.b(j, k) = draw(0.0, cfg.batch_effect_scale);
  }
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < d; ++k) truth.v(j, k) = draw(0.0, cfg.loading_sd);

  SimData out;
  out.covs.x = Matrix::Zero(n, p);
  out.covs.z = Matrix::Ones(m, 1);
  out.truth.groups.assign(static_cast<std::size_t>(n), 0);
  out.truth.batches.assign(static_cast<std::size_t>(n), 0);

  std::vector<std::mt19937_64> streams(static_cast<std::size_t>(n));
  parallel_for(0, n, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    for (Index i = lo; i < hi; ++i) {
      auto& rng = streams[static_cast<std::size_t>(i)];
      rng.seed(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
      std::discrete_distribution<int> group(cfg.group_probs.begin(), cfg.group_probs.end());
      std::uniform_int_distribution<int> batch(0, cfg.n_batches - 1);
      std::normal_distribution<double> z(0.0, 1.0);
      const int g = group(rng);
      const int b = batch(rng);
      out.truth.groups[static_cast<std::size_t>(i)] = g;
      out.truth.batches[static_cast<std::size_t>(i)] = b;
      out.covs.x(i, 0) = 1.0;
      if (b > 0) out.covs.x(i, b) = 1.0;
      truth.gamma(i, 0) = cfg.libsize_log_sd * z(rng);
      for (Index k = 0; k < d; ++k)
        truth.u(i, k) = centroids(g, k) + cfg.within_group_sd * z(rng);
    }
  });

  Matrix eta = linear_predictor(truth, out.covs);
  auto all_ok = [&] {
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i)
        if (!representable(cfg.family, cfg.link, eta(i, j))) return false;
    return true;
  };
  int rescales = 0;
  while (!all_ok()) {
    if (d == 0 || rescales >= kMaxRescales)
      throw ConfigError("simulated means are not representable under the chosen link");
    truth.v *= 0.5;
    out.truth.rescaled = true;
    eta = linear_predictor(truth, out.covs);
    ++rescales;
  }

  Matrix mu = eta.unaryExpr([&](double e) { return link_inverse(cfg.link, e); });
  Matrix y(n, m);
  parallel_for(0, n, [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    for (Index i = lo; i < hi; ++i) {
      auto& rng = streams[static_cast<std::size_t>(i)];
      for (Index j = 0; j < m; ++j) y(i, j) = sample_response(cfg.family, mu(i, j), cfg.phi, rng);
    }
  });

  out.data = ResponseMatrix(std::move(y));
  out.truth.params = std::move(truth);
  out.truth.mu = std::move(mu);
  return out;
}

}  // namespace gmfkit
