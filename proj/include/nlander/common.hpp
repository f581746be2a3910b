// Shared numeric types and the error hierarchy used across the library.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nlander {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public Error { using Error::Error; };
class NonFiniteStateError : public Error { using Error::Error; };
class SingularityError : public Error { using Error::Error; };
class DimensionMismatchError : public Error { using Error::Error; };
class ZeroLayerError : public Error { using Error::Error; };
class EmptyDataError : public Error { using Error::Error; };
class NonFiniteLossError : public Error { using Error::Error; };
class TooShortLogError : public Error { using Error::Error; };
class DegenerateForceError : public Error { using Error::Error; };
class ContractionViolationError : public Error { using Error::Error; };
class GainConditionError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

inline constexpr double kPi = 3.14159265358979323846;

/// Skew-symmetric matrix S(w) with S(w) x = w x x.
inline Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

/// Inverse of skew() for a skew-symmetric input.
inline Vec3 vee(const Mat3& s) { return Vec3(s(2, 1), s(0, 2), s(1, 0)); }

/// Nearest rotation matrix in the Frobenius sense (polar factor).
inline Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

inline double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

/// Unit quaternion (w, x, y, z) with w >= 0.
inline Vec4 rotation_to_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0.0) out = -out;
  return out;
}

inline Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline bool all_finite(const Eigen::Ref<const MatX>& m) { return m.allFinite(); }

/// Smallest eigenvalue of the symmetric part of m.
inline double lambda_min(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

inline double lambda_max(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().maxCoeff();
}

inline bool is_symmetric_positive_definite(const Mat3& m, double tol = 1e-12) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  return lambda_min(m) > 0.0;
}

/// 64-bit FNV-1a; stable across platforms, used for provenance stamps.
inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace nlander
