#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "embctl/errors.hpp"

namespace embctl {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using MatN = Eigen::MatrixXd;
using VecN = Eigen::VectorXd;

/// hat(v) w = v x w for all w.
inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

inline constexpr double kSkewTol = 1e-9;

/// Inverse of hat. Requires M skew-symmetric within kSkewTol per entry.
inline Vec3 vee(const Mat3& m) {
  const Mat3 s = 0.5 * (m + m.transpose());
  if (s.cwiseAbs().maxCoeff() > kSkewTol) {
    throw NotSkewSymmetric("vee: symmetric part exceeds tolerance");
  }
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

inline Mat3 sym(const Mat3& a) { return 0.5 * (a + a.transpose()); }
inline Mat3 skew(const Mat3& a) { return 0.5 * (a - a.transpose()); }

inline Mat3 commutator(const Mat3& a, const Mat3& b) { return a * b - b * a; }

/// <A,B> = tr(A^T B)
inline double frob_inner(const MatN& a, const MatN& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("frob_inner: shape mismatch");
  }
  return (a.array() * b.array()).sum();
}

inline double frob_norm(const MatN& a) { return a.norm(); }

/// Rotation about a unit axis by `angle` radians (Rodrigues formula).
inline Mat3 rodrigues_exp(const Vec3& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > 1e-9) {
    throw NonUnitAxis("rodrigues_exp: axis must be unit length");
  }
  const Mat3 k = hat(axis);
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

/// Smallest and largest eigenvalue of a symmetric matrix.
inline std::pair<double, double> sym_eig_bounds(const MatN& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("sym_eig_bounds: matrix not square");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw NotSymmetric("sym_eig_bounds: matrix not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatN> es(0.5 * (a + a.transpose()),
                                         Eigen::EigenvaluesOnly);
  const VecN& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

}  // namespace embctl
