#include "gmfkit/glm.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <vector>

#include "gmfkit/errors.hpp"

namespace gmfkit {

double glm_start_mean(const FamilySpec& fam, double y) {
  switch (fam.kind) {
    case FamilyKind::Gaussian: return y;
    case FamilyKind::Bernoulli: return (y + 0.5) / 2.0;
    case FamilyKind::Poisson:
    case FamilyKind::NegBinomial: return y + 0.1;
    case FamilyKind::Gamma:
    case FamilyKind::InverseGaussian: return std::max(y, 1e-8);
  }
  return y;
}

namespace {

struct Compact {
  Matrix x;
  Vector y;
  Vector w;
  Vector offset;
};

Compact compact(const Matrix& x, const Vector& y, const Vector& w, const Vector& offset,
                const Eigen::Array<bool, Eigen::Dynamic, 1>& include) {
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i)
    if (include(i)) keep.push_back(i);
  return {x(keep, Eigen::all), y(keep), w(keep), offset(keep)};
}

// Deviance at eta, or a negative value when eta leaves the link domain.
double deviance_at(const Compact& c, const Vector& eta, const FamilySpec& fam,
                   const LinkSpec& link, Vector& mu) {
  mu.resize(eta.size());
  double dev = 0.0;
  try {
    for (Index i = 0; i < eta.size(); ++i) {
      mu(i) = clamp_mean(fam, link_inverse(link, eta(i)));
      check_mean(fam, mu(i));
      dev += unit_deviance(fam, c.y(i), mu(i), c.w(i));
    }
  } catch (const DomainError&) {
    return -1.0;
  }
  return std::isfinite(dev) ? dev : -1.0;
}

Vector solve_weighted(const Compact& c, const Vector& weight, const Vector& z, double ridge) {
  const Matrix xw = c.x.transpose() * weight.asDiagonal();
  Matrix normal = xw * c.x;
  normal.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success)
    throw SingularSystemError("GLM normal equations are not positive definite");
  Vector sol = llt.solve(xw * z);
  if (!sol.allFinite()) throw SingularSystemError("GLM normal equations are singular");
  return sol;
}

}  // namespace

GlmFit fit_glm(const Matrix& x, const Vector& y, const Vector& weights, const Vector& offset,
               const Eigen::Array<bool, Eigen::Dynamic, 1>& include, const FamilySpec& fam,
               const LinkSpec& link, const GlmOptions& opts) {
  const Compact c = compact(x, y, weights, offset, include);
  GlmFit fit;
  fit.coef = Vector::Zero(x.cols());
  const Index nobs = c.y.size();
  if (x.cols() == 0 || nobs == 0) {
    fit.converged = true;
    Vector mu;
    const double dev = deviance_at(c, c.offset, fam, link, mu);
    fit.deviance = std::max(dev, 0.0);
    return fit;
  }

  // First pass from the starting means.
  Vector mu(nobs);
  Vector eta(nobs);
  for (Index i = 0; i < nobs; ++i) {
    check_response(fam, c.y(i));
    mu(i) = glm_start_mean(fam, c.y(i));
    eta(i) = link_eval(link, mu(i));
  }

  double dev_old = -1.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    Vector weight(nobs);
    Vector z(nobs);
    for (Index i = 0; i < nobs; ++i) {
      const double g1 = link_deriv1(link, mu(i));
      weight(i) = c.w(i) / (variance(fam, mu(i)) * g1 * g1);
      z(i) = eta(i) - c.offset(i) + (c.y(i) - mu(i)) * g1;
    }
    Vector coef = solve_weighted(c, weight, z, opts.ridge);

    Vector mu_new;
    Vector eta_new = c.offset + c.x * coef;
    double dev = deviance_at(c, eta_new, fam, link, mu_new);
    int halvings = 0;
    while ((dev < 0.0 || (dev_old >= 0.0 && dev > dev_old * (1.0 + 1e-12))) && halvings < 30) {
      if (it == 0 && dev >= 0.0) break;
      coef = 0.5 * (coef + fit.coef);
      eta_new = c.offset + c.x * coef;
      dev = deviance_at(c, eta_new, fam, link, mu_new);
      ++halvings;
    }
    if (dev < 0.0) throw DomainError("GLM iteration left the link domain");

    fit.coef = coef;
    fit.iterations = it + 1;
    fit.deviance = dev;
    mu = mu_new;
    eta = eta_new;
    if (dev_old >= 0.0 && std::abs(dev - dev_old) / (std::abs(dev) + 0.1) < opts.tol) {
      fit.converged = true;
      break;
    }
    dev_old = dev;
  }
  return fit;
}

}  // namespace gmfkit
