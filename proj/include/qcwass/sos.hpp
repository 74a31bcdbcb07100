#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/error.hpp"

namespace qcwass::sos {

// Number of free entries of a symmetric side x side matrix.
inline int svec_size(int side) { return side * (side + 1) / 2; }

// Symmetric vectorization (lower triangle, column-major) with off-diagonal
// entries scaled by sqrt(2), so that <svec(A), svec(B)> = <A, B>_F.
inline Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd out(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) out[k++] = i == j ? m(i, i) : std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
  }
  return out;
}

inline Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int side) {
  Eigen::MatrixXd m(side, side);
  int k = 0;
  for (int j = 0; j < side; ++j) {
    for (int i = j; i < side; ++i) {
      if (i == j) {
        m(i, i) = v[k++];
      } else {
        m(i, j) = m(j, i) = v[k++] / std::sqrt(2.0);
      }
    }
  }
  return m;
}

// Coefficients of x_m^T G x_m in the monomial basis, where x_m = (1, x, ...,
// x^{side-1}): entry k is the anti-diagonal sum sum_{i+j=k} G_ij.
inline Eigen::VectorXd gram_to_coefficients(const Eigen::MatrixXd& gram) {
  const int n = static_cast<int>(gram.rows());
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) c[i + j] += gram(i, j);
  }
  return c;
}

// The same linear map written on svec coordinates: a (2 side - 1) x
// svec_size(side) matrix.
inline Eigen::MatrixXd gram_map(int side) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2 * side - 1, svec_size(side));
  int k = 0;
  for (int j = 0; j < side; ++j) {
    for (int i = j; i < side; ++i) {
      v(i + j, k++) = i == j ? 1.0 : std::sqrt(2.0);
    }
  }
  return v;
}

// Shape of the nonnegativity certificate of S' on an interval, where S has
// degree d. Odd d: S' = Z + (x - t0)(t1 - x) W. Even d: S' = (x - t0) Z +
// (t1 - x) W. Z and W are SOS with Gram matrices of the given sides (a side of
// 0 means the term is absent).
struct CertificateShape {
  int degree;
  int z_side;
  int w_side;
  bool odd;
};

inline CertificateShape certificate_shape(int degree) {
  if (degree < 1) throw DomainError("SOS certificate: degree must be at least 1");
  if (degree % 2 == 1) {
    const int p = (degree - 1) / 2;
    return {degree, p + 1, p, true};
  }
  const int p = degree / 2;
  return {degree, p, p, false};
}

// Linear maps from the SOS coefficient vectors (z, w) to the coefficients
// (s_1, ..., s_d) of S. For odd d these are A (d x d) and B (d x d-2); for
// even d, C and D (both d x d-1). Each already includes the 1/k factor that
// turns derivative coefficients back into coefficients of S.
struct DerivativeMaps {
  Eigen::MatrixXd z_map;
  Eigen::MatrixXd w_map;
};

inline DerivativeMaps derivative_maps(int degree, double t0, double t1) {
  const auto shape = certificate_shape(degree);
  const int d = degree;
  Eigen::VectorXd inv_diag(d);
  for (int k = 0; k < d; ++k) inv_diag[k] = 1.0 / (k + 1);
  const auto dinv = inv_diag.asDiagonal();

  // Block selectors: identity stacked over / under zero rows.
  auto top = [](int rows, int cols) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    m.topRows(cols).setIdentity();
    return m;
  };
  auto shifted = [](int rows, int cols, int offset) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
    m.block(offset, 0, cols, cols).setIdentity();
    return m;
  };

  DerivativeMaps maps;
  if (shape.odd) {
    maps.z_map = dinv * Eigen::MatrixXd::Identity(d, d);
    const int wn = d - 2;
    if (wn > 0) {
      maps.w_map = dinv * ((t0 + t1) * shifted(d, wn, 1) - shifted(d, wn, 2) - t0 * t1 * top(d, wn));
    } else {
      maps.w_map = Eigen::MatrixXd::Zero(d, 0);
    }
  } else {
    const int n = d - 1;
    maps.z_map = dinv * (shifted(d, n, 1) - t0 * top(d, n));
    maps.w_map = dinv * (t1 * top(d, n) - shifted(d, n, 1));
  }
  return maps;
}

// Full linear map from [svec(G_Z); svec(G_W)] to (s_1, ..., s_d).
inline Eigen::MatrixXd certificate_to_coefficients(int degree, double t0, double t1) {
  const auto shape = certificate_shape(degree);
  const auto maps = derivative_maps(degree, t0, t1);
  const int nz = svec_size(shape.z_side);
  const int nw = svec_size(shape.w_side);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(degree, nz + nw);
  out.leftCols(nz) = maps.z_map * gram_map(shape.z_side);
  if (nw > 0) out.rightCols(nw) = maps.w_map * gram_map(shape.w_side);
  return out;
}

}  // namespace qcwass::sos
