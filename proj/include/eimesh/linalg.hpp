#pragma once

// Small symmetric-tensor helpers that act on the leading dim x dim block of a
// Mat3. Entries outside that block are ignored on input and zero on output.

#include "eimesh/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace eimesh::linalg {

inline Mat3 outer(const Vec3& v) { return v * v.transpose(); }

inline Mat3 leading_block(const Mat3& a, int dim) {
  Mat3 r = Mat3::Zero();
  r.topLeftCorner(dim, dim) = a.topLeftCorner(dim, dim);
  return r;
}

inline double trace(const Mat3& a, int dim) { return a.topLeftCorner(dim, dim).trace(); }

inline double det(const Mat3& a, int dim) {
  if (dim == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return a.determinant();
}

inline Mat3 inverse(const Mat3& a, int dim) {
  Mat3 r = Mat3::Zero();
  if (dim == 2) {
    const double d = det(a, 2);
    r(0, 0) = a(1, 1) / d;
    r(1, 1) = a(0, 0) / d;
    r(0, 1) = -a(0, 1) / d;
    r(1, 0) = -a(1, 0) / d;
  } else {
    r = a.inverse();
  }
  return r;
}

inline double quad_form(const Mat3& m, const Vec3& v) { return v.dot(m * v); }

inline Mat3 symmetrize(const Mat3& a) { return 0.5 * (a + a.transpose()); }

inline bool is_symmetric(const Mat3& a, int dim, double tol) {
  const double scale = std::max(1.0, a.topLeftCorner(dim, dim).cwiseAbs().maxCoeff());
  for (int r = 0; r < dim; ++r)
    for (int c = r + 1; c < dim; ++c)
      if (std::abs(a(r, c) - a(c, r)) > tol * scale) return false;
  return true;
}

struct SymEigen {
  Vec3 values = Vec3::Zero();   // ascending, first dim entries valid
  Mat3 vectors = Mat3::Zero();  // columns, leading dim x dim block valid
};

inline SymEigen eigen_sym(const Mat3& a, int dim) {
  SymEigen out;
  if (dim == 2) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a.topLeftCorner<2, 2>());
    out.values.head<2>() = es.eigenvalues();
    out.vectors.topLeftCorner<2, 2>() = es.eigenvectors();
  } else {
    Eigen::SelfAdjointEigenSolver<Mat3> es(a);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

inline Mat3 compose(const SymEigen& e, int dim) {
  Mat3 r = Mat3::Zero();
  for (int k = 0; k < dim; ++k) r += e.values[k] * outer(e.vectors.col(k));
  return leading_block(symmetrize(r), dim);
}

// Lower-triangular L with L L^T = a (a SPD). Used to map metric space onto
// Euclidean space: |L^T v| is the metric length of v.
inline Mat3 cholesky(const Mat3& a, int dim) {
  Mat3 r = Mat3::Zero();
  if (dim == 2) {
    Eigen::LLT<Eigen::Matrix2d> llt(a.topLeftCorner<2, 2>());
    r.topLeftCorner<2, 2>() = llt.matrixL();
  } else {
    Eigen::LLT<Mat3> llt(a);
    r = llt.matrixL();
  }
  return r;
}

}  // namespace eimesh::linalg
