#pragma once

// Dense linear algebra helpers on top of Eigen.

#include <cstdint>

#include "gmfkit/model.hpp"

namespace gmfkit {

struct SvdResult {
  Matrix u;  // left singular vectors, one per column
  Vector s;  // descending
  Matrix v;  // right singular vectors
};

/// Thin SVD of a dense matrix.
SvdResult thin_svd(const Matrix& a);

/// Leading k singular triplets by a randomized range finder (Gaussian test
/// matrix, `oversample` extra columns, `power_iters` subspace iterations with
/// re-orthonormalization). Falls back to the exact thin SVD when k +
/// oversample reaches min(rows, cols). Deterministic given the seed.
SvdResult truncated_svd(const Matrix& a, Index k, std::uint64_t seed, Index oversample = 10,
                        int power_iters = 2);

/// SVD of u * v^T from the factors (QR of each, then a small SVD). Requires
/// u.rows() >= u.cols() and v.rows() >= v.cols().
SvdResult factor_product_svd(const Matrix& u, const Matrix& v);

/// Orthonormal basis Q (rows x cols) and upper-triangular R (cols x cols)
/// of a tall matrix.
struct ThinQr {
  Matrix q;
  Matrix r;
};
ThinQr thin_qr(const Matrix& a);

/// (X^T X)^{-1} X^T Y. Throws SingularSystemError when X is column-rank
/// deficient.
Matrix least_squares(const Matrix& x, const Matrix& y, const char* what = "design");

/// Symmetric square root and inverse square root of a positive semidefinite
/// matrix. Eigenvalues below `tol * max_eigenvalue` are treated as zero (the
/// inverse root then uses zero on that subspace). `rank` receives the number
/// of retained eigenvalues when non-null.
Matrix sym_sqrt(const Matrix& s, double tol = 1e-12, Index* rank = nullptr);
Matrix sym_inv_sqrt(const Matrix& s, double tol = 1e-12, Index* rank = nullptr);

/// Flip column pairs so that the first entry of each `ref` column with
/// |value| > tol is positive. The same flip is applied to `other`.
void fix_column_signs(Matrix& ref, Matrix& other, double tol = 1e-12);

}  // namespace gmfkit
