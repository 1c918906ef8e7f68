#include "gmfkit/metrics.hpp"

#include <cmath>
#include <vector>

#include "gmfkit/errors.hpp"

namespace gmfkit {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> mu) {
  if (y.size() != mu.size()) throw ConfigError("prediction and response lengths differ");
  if (y.empty()) throw ConfigError("empty test set");
}

}  // namespace

double rel_log_rmse(std::span<const double> y, std::span<const double> mu, double ybar) {
  check_lengths(y, mu);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double a = std::log((1.0 + y[k]) / (1.0 + mu[k]));
    const double b = std::log((1.0 + y[k]) / (1.0 + ybar));
    num += a * a;
    den += b * b;
  }
  if (!(den > 0.0)) throw DegenerateError("log error baseline is zero: every test value equals the train mean");
  return num / den;
}

double rel_deviance(std::span<const double> y, std::span<const double> mu, double ybar,
                    const FamilySpec& fam) {
  check_lengths(y, mu);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    num += unit_deviance(fam, y[k], mu[k]);
    den += unit_deviance(fam, y[k], ybar);
  }
  if (!(den > 0.0)) throw DegenerateError("deviance baseline is zero: every test value equals the train mean");
  return num / den;
}

double observed_mean(const ResponseMatrix& data) {
  double total = 0.0;
  Index count = 0;
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i)
      if (data.observed(i, j)) {
        total += data.value(i, j);
        ++count;
      }
  if (count == 0) throw DegenerateError("no observed entries");
  return total / static_cast<double>(count);
}

EvalResult evaluate(const Matrix& truth, const Matrix& mu,
                    const std::vector<std::pair<Index, Index>>& entries, double ybar,
                    const FamilySpec& fam) {
  if (truth.rows() != mu.rows() || truth.cols() != mu.cols())
    throw ConfigError("prediction shape does not match the data");
  std::vector<double> y;
  std::vector<double> m;
  y.reserve(entries.size());
  m.reserve(entries.size());
  for (const auto& [i, j] : entries) {
    if (i < 0 || i >= truth.rows() || j < 0 || j >= truth.cols())
      throw IndexError("test entry out of range");
    y.push_back(truth(i, j));
    m.push_back(mu(i, j));
  }
  EvalResult out;
  out.n_test = static_cast<Index>(entries.size());
  out.rel_log_rmse = rel_log_rmse(y, m, ybar);
  out.rel_deviance = rel_deviance(y, m, ybar, fam);
  return out;
}

}  // namespace gmfkit
