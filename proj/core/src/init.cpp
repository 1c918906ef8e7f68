#include "gmfkit/init.hpp"

#include <algorithm>
#include <cmath>

#include "gmfkit/errors.hpp"
#include "gmfkit/glm.hpp"
#include "gmfkit/linalg.hpp"

namespace gmfkit {

using BoolVec = Eigen::Array<bool, Eigen::Dynamic, 1>;

std::string_view init_name(InitKind kind) {
  return kind == InitKind::GlmSvd ? "glm-svd" : "ols-svd";
}

InitKind parse_init(std::string_view name) {
  if (name == "glm-svd" || name == "glm") return InitKind::GlmSvd;
  if (name == "ols-svd" || name == "ols") return InitKind::OlsSvd;
  throw ConfigError("unknown initialization '" + std::string(name) + "'");
}

double default_link_epsilon(const LinkSpec& link) {
  switch (link.kind) {
    case LinkKind::Log: return 0.1;
    case LinkKind::Logit: return 0.01;
    case LinkKind::Identity: return 0.0;
    case LinkKind::Inverse:
    case LinkKind::InverseSquared: return 1e-3;
  }
  return 0.1;
}

double perturbed_link(const LinkSpec& link, double y, double eps) {
  switch (link.kind) {
    case LinkKind::Identity: return y;
    case LinkKind::Log: return std::log(std::max(y, 0.0) + eps);
    case LinkKind::Logit: {
      const double c = std::clamp(y, eps, 1.0 - eps);
      return std::log(c / (1.0 - c));
    }
    case LinkKind::Inverse: return 1.0 / std::max(y, eps);
    case LinkKind::InverseSquared: {
      const double c = std::max(y, eps);
      return 1.0 / (c * c);
    }
  }
  return y;
}

namespace {

double epsilon_for(const InitMethod& method, const LinkSpec& link) {
  if (method.link_epsilon < 0.0) throw ConfigError("link epsilon must be positive");
  return method.link_epsilon > 0.0 ? method.link_epsilon : default_link_epsilon(link);
}

void check_rank(Index d, Index n, Index m) {
  if (d < 0 || d > std::min(n, m)) throw ConfigError("rank must lie in [0, min(n, m)]");
}

// Least squares over the included entries; zero coefficients when nothing
// is included.
Vector masked_least_squares(const Matrix& x, const Vector& y, const BoolVec& include) {
  if (x.cols() == 0) return Vector(0);
  std::vector<Index> keep;
  for (Index i = 0; i < y.size(); ++i)
    if (include(i)) keep.push_back(i);
  if (static_cast<Index>(keep.size()) < x.cols()) return Vector::Zero(x.cols());
  const Matrix xs = x(keep, Eigen::all);
  const Matrix ys = y(keep);
  return least_squares(xs, ys).col(0);
}

BoolVec column_mask(const ResponseMatrix& data, Index j) { return data.mask().col(j); }
BoolVec row_mask(const ResponseMatrix& data, Index i) { return data.mask().row(i).transpose(); }

Matrix transformed_response(const ResponseMatrix& data, const LinkSpec& link, double eps) {
  Matrix out = Matrix::Zero(data.rows(), data.cols());
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i)
      if (data.observed(i, j)) out(i, j) = perturbed_link(link, data.value(i, j), eps);
  return out;
}

// Sets phi (Pearson at the initial means) and the negative binomial shape.
void finish_state(FactorizationState& s, const ResponseMatrix& data, const CovariateSet& covs,
                  const FamilySpec& fam, const LinkSpec& link, const InitMethod& method) {
  s.phi = 1.0;
  s.nb_shape = fam.kind == FamilyKind::NegBinomial ? fam.nb_shape : 1.0;
  Matrix eta = linear_predictor(s, covs);
  const FamilySpec f = effective_family(fam, s);
  double pearson = 0.0;
  double num = 0.0;
  double den = 0.0;
  try {
    for (Index j = 0; j < data.cols(); ++j) {
      for (Index i = 0; i < data.rows(); ++i) {
        if (!data.observed(i, j)) continue;
        const double mu = clamp_mean(f, link_inverse(link, eta(i, j)));
        const double w = data.weight(i, j);
        const double r = data.value(i, j) - mu;
        pearson += w * r * r / variance(f, mu);
        num += w * mu * mu;
        den += w * (r * r - mu);
      }
    }
  } catch (const DomainError&) {
    return;
  }
  if (has_free_dispersion(fam.kind)) {
    const double k = static_cast<double>(
        parameter_count(s.n(), s.m(), s.b.cols(), s.gamma.cols(), s.rank()));
    double dof = static_cast<double>(data.observed_count()) - k;
    if (!(dof > 0.0)) dof = static_cast<double>(data.observed_count());
    const double phi = pearson / dof;
    if (std::isfinite(phi)) s.phi = std::max(phi, 1e-10);
  }
  if (fam.kind == FamilyKind::NegBinomial) {
    const double shape = den > 0.0 ? num / den : method.nb_shape_max;
    s.nb_shape = std::clamp(std::isfinite(shape) ? shape : method.nb_shape_max,
                            method.nb_shape_floor, method.nb_shape_max);
  }
}

double residual(const FamilySpec& fam, ResidualKind kind, double y, double mu, double w) {
  if (kind == ResidualKind::Pearson) return (y - mu) * std::sqrt(w / variance(fam, mu));
  const double dev = unit_deviance(fam, y, mu, w);
  if (y == mu) return 0.0;
  return (y > mu ? 1.0 : -1.0) * std::sqrt(std::max(dev, 0.0));
}

}  // namespace

Matrix covariate_residuals(const Matrix& y, const Mask& mask, const CovariateSet& covs,
                           Matrix* b, Matrix* gamma) {
  const Index n = y.rows();
  const Index m = y.cols();
  const bool full = mask.all();
  Matrix bm = Matrix::Zero(m, covs.p());
  Matrix gm = Matrix::Zero(n, covs.q());
  if (covs.p() > 0) {
    if (full) {
      bm = least_squares(covs.x, y, "row design X").transpose();
    } else {
      for (Index j = 0; j < m; ++j)
        bm.row(j) = masked_least_squares(covs.x, y.col(j), mask.col(j)).transpose();
    }
  }
  Matrix resid = y;
  if (covs.p() > 0) resid -= covs.x * bm.transpose();
  if (covs.q() > 0) {
    if (full) {
      gm = least_squares(covs.z, resid.transpose(), "column design Z").transpose();
    } else {
      for (Index i = 0; i < n; ++i)
        gm.row(i) =
            masked_least_squares(covs.z, resid.row(i).transpose(), mask.row(i).transpose())
                .transpose();
    }
    resid -= gm * covs.z.transpose();
  }
  if (b) *b = std::move(bm);
  if (gamma) *gamma = std::move(gm);
  return mask.select(resid, Matrix::Zero(n, m));
}

InitResult init_ols_svd(const ResponseMatrix& data, const CovariateSet& covs,
                        const FamilySpec& fam, const LinkSpec& link, Index d,
                        const InitMethod& method) {
  const Index n = data.rows();
  const Index m = data.cols();
  check_rank(d, n, m);
  if (covs.x.rows() != n || covs.z.rows() != m)
    throw ConfigError("covariates do not match the response matrix");
  const double eps = epsilon_for(method, link);
  const Matrix ye = transformed_response(data, link, eps);

  InitResult out;
  FactorizationState& s = out.state;
  s = FactorizationState::zeros(n, m, covs.p(), covs.q(), d);

  const Matrix resid = covariate_residuals(ye, data.mask(), covs, &s.b, &s.gamma);

  if (d > 0) {
    const SvdResult svd = truncated_svd(resid, d, method.seed);
    s.u = svd.u * svd.s.asDiagonal();
    s.v = svd.v;
  }
  finish_state(s, data, covs, fam, link, method);
  return out;
}

InitResult init_glm_svd(const ResponseMatrix& data, const CovariateSet& covs,
                        const FamilySpec& fam, const LinkSpec& link, Index d,
                        const InitMethod& method) {
  const Index n = data.rows();
  const Index m = data.cols();
  check_rank(d, n, m);
  if (covs.x.rows() != n || covs.z.rows() != m)
    throw ConfigError("covariates do not match the response matrix");
  const double eps = epsilon_for(method, link);

  InitResult out;
  FactorizationState& s = out.state;
  s = FactorizationState::zeros(n, m, covs.p(), covs.q(), d);
  const Matrix& y = data.values();
  const Matrix& w = data.weights();

  auto glm_or_ols = [&](const Matrix& x, const Vector& resp, const Vector& wt,
                        const Vector& offset, const BoolVec& include,
                        const GlmOptions& opts) -> Vector {
    try {
      GlmFit fit = fit_glm(x, resp, wt, offset, include, fam, link, opts);
      if (fit.converged && fit.coef.allFinite()) return fit.coef;
    } catch (const Error&) {
    }
    ++out.fallbacks;
    Vector target(resp.size());
    for (Index k = 0; k < resp.size(); ++k)
      target(k) = include(k) ? perturbed_link(link, resp(k), eps) - offset(k) : 0.0;
    try {
      return masked_least_squares(x, target, include);
    } catch (const SingularSystemError&) {
      return Vector::Zero(x.cols());
    }
  };

  if (covs.p() > 0) {
    for (Index j = 0; j < m; ++j)
      s.b.row(j) = glm_or_ols(covs.x, y.col(j), w.col(j), Vector::Zero(n), column_mask(data, j), {})
                       .transpose();
  }
  if (covs.q() > 0) {
    const Matrix xb = covs.p() > 0 ? Matrix(covs.x * s.b.transpose()) : Matrix(Matrix::Zero(n, m));
    for (Index i = 0; i < n; ++i)
      s.gamma.row(i) = glm_or_ols(covs.z, y.row(i).transpose(), w.row(i).transpose(),
                                  xb.row(i).transpose(), row_mask(data, i), {})
                           .transpose();
  }

  const Matrix eta0 = linear_predictor(s, covs);
  Matrix resid = Matrix::Zero(n, m);
  try {
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < n; ++i) {
        if (!data.observed(i, j)) continue;
        const double mu = clamp_mean(fam, link_inverse(link, eta0(i, j)));
        resid(i, j) = residual(fam, method.residual, y(i, j), mu, w(i, j));
      }
    }
  } catch (const DomainError&) {
    // The covariate-only predictor is outside the link domain (for example
    // no covariates under an inverse link): use the transformed-response path.
    InitResult ols = init_ols_svd(data, covs, fam, link, d, method);
    ols.fallbacks = m;
    return ols;
  }

  if (d > 0) {
    const SvdResult svd = truncated_svd(resid, d, method.seed);
    s.u = svd.u * svd.s.asDiagonal();
    GlmOptions opts;
    opts.ridge = 1e-8;
    for (Index j = 0; j < m; ++j)
      s.v.row(j) =
          glm_or_ols(s.u, y.col(j), w.col(j), eta0.col(j), column_mask(data, j), opts).transpose();
  }
  finish_state(s, data, covs, fam, link, method);
  return out;
}

InitResult initialize(const ResponseMatrix& data, const CovariateSet& covs,
                      const FamilySpec& fam, const LinkSpec& link, Index d,
                      const InitMethod& method) {
  if (method.kind == InitKind::GlmSvd) return init_glm_svd(data, covs, fam, link, d, method);
  return init_ols_svd(data, covs, fam, link, d, method);
}

}  // namespace gmfkit
