#include "gmfkit/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <random>

#include "gmfkit/errors.hpp"

namespace gmfkit {

SvdResult thin_svd(const Matrix& a) {
  SvdResult out;
  if (a.rows() == 0 || a.cols() == 0) {
    const Index k = std::min(a.rows(), a.cols());
    out.u = Matrix::Zero(a.rows(), k);
    out.s = Vector::Zero(k);
    out.v = Matrix::Zero(a.cols(), k);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = svd.matrixU();
  out.s = svd.singularValues();
  out.v = svd.matrixV();
  return out;
}

ThinQr thin_qr(const Matrix& a) {
  const Index k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Matrix> qr(a);
  ThinQr out;
  out.q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return out;
}

namespace {

Matrix orthonormalize(const Matrix& a) { return thin_qr(a).q; }

SvdResult truncate(const SvdResult& full, Index k) {
  SvdResult out;
  out.u = full.u.leftCols(k);
  out.s = full.s.head(k);
  out.v = full.v.leftCols(k);
  return out;
}

}  // namespace

SvdResult truncated_svd(const Matrix& a, Index k, std::uint64_t seed, Index oversample,
                        int power_iters) {
  const Index kmax = std::min(a.rows(), a.cols());
  if (k < 0 || k > kmax) throw ConfigError("requested rank exceeds matrix dimensions");
  if (k == 0) {
    return {Matrix(a.rows(), 0), Vector(0), Matrix(a.cols(), 0)};
  }
  if (k + oversample >= kmax) return truncate(thin_svd(a), k);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix omega(a.cols(), k + oversample);
  for (Index j = 0; j < omega.cols(); ++j)
    for (Index i = 0; i < omega.rows(); ++i) omega(i, j) = normal(rng);

  Matrix q = orthonormalize(a * omega);
  for (int it = 0; it < power_iters; ++it) {
    q = orthonormalize(a.transpose() * q);
    q = orthonormalize(a * q);
  }
  const Matrix small = q.transpose() * a;
  SvdResult s = thin_svd(small);
  SvdResult out;
  out.u = q * s.u.leftCols(k);
  out.s = s.s.head(k);
  out.v = s.v.leftCols(k);
  return out;
}

SvdResult factor_product_svd(const Matrix& u, const Matrix& v) {
  const Index d = u.cols();
  if (v.cols() != d) throw ConfigError("factor ranks differ");
  if (d == 0) return {Matrix(u.rows(), 0), Vector(0), Matrix(v.rows(), 0)};
  if (u.rows() < d || v.rows() < d)
    throw ConfigError("factor rank exceeds the number of rows or columns");
  const ThinQr qu = thin_qr(u);
  const ThinQr qv = thin_qr(v);
  const SvdResult core = thin_svd(qu.r * qv.r.transpose());
  return {qu.q * core.u, core.s, qv.q * core.v};
}

Matrix least_squares(const Matrix& x, const Matrix& y, const char* what) {
  if (x.cols() == 0) return Matrix(0, y.cols());
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols())
    throw SingularSystemError(std::string(what) + " is not of full column rank");
  return qr.solve(y);
}

namespace {

Matrix sym_power(const Matrix& s, double power, double tol, Index* rank) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) throw SingularSystemError("eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();
  const double top = ev.size() > 0 ? std::max(ev.maxCoeff(), 0.0) : 0.0;
  Vector scaled(ev.size());
  Index kept = 0;
  for (Index k = 0; k < ev.size(); ++k) {
    if (top > 0.0 && ev(k) > tol * top) {
      scaled(k) = std::pow(ev(k), power);
      ++kept;
    } else {
      scaled(k) = 0.0;
    }
  }
  if (rank) *rank = kept;
  return eig.eigenvectors() * scaled.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Matrix sym_sqrt(const Matrix& s, double tol, Index* rank) { return sym_power(s, 0.5, tol, rank); }

Matrix sym_inv_sqrt(const Matrix& s, double tol, Index* rank) {
  return sym_power(s, -0.5, tol, rank);
}

void fix_column_signs(Matrix& ref, Matrix& other, double tol) {
  for (Index k = 0; k < ref.cols(); ++k) {
    for (Index i = 0; i < ref.rows(); ++i) {
      const double val = ref(i, k);
      if (std::abs(val) > tol) {
        if (val < 0.0) {
          ref.col(k) *= -1.0;
          other.col(k) *= -1.0;
        }
        break;
      }
    }
  }
}

}  // namespace gmfkit
