// Rotation / pose primitives used throughout the estimator.
//
// Rotations are stored as unit quaternions and renormalized after every
// composition; matrix forms are generated on demand. so3_exp/so3_log switch
// to series expansions below 1e-6 rad.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace aslio {

// Angle below which exp/log/Jacobians use their series expansions.
inline constexpr double kSmallAngle = 1e-6;
// Angles within this margin of pi are flagged as near-singular for log.
inline constexpr double kNearPiMargin = 1e-6;

/// Skew-symmetric cross-product matrix: skew(v) * w == v.cross(w).
inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

/// Unit-quaternion rotation. Normalized on construction and after every
/// composition so the unit-norm invariant holds to well below 1e-9.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  explicit Rotation(const Eigen::Matrix3d& m) : q_(Eigen::Quaterniond(m).normalized()) {}

  static Rotation identity() { return Rotation(); }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }

  Rotation operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return q_ * v; }

  /// Geodesic angle to another rotation, in [0, pi]. atan2-based, so it stays
  /// accurate down to machine precision for near-identical rotations.
  double angle_to(const Rotation& other) const {
    const Eigen::Quaterniond rel = q_.conjugate() * other.q_;
    return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  }

 private:
  Eigen::Quaterniond q_;
};

/// Exponential map so(3) -> SO(3). Total function, continuous at omega -> 0.
inline Rotation so3_exp(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  const double half = 0.5 * angle;
  double sinc_half;  // sin(angle/2)/angle
  if (angle > kSmallAngle) {
    sinc_half = std::sin(half) / angle;
  } else {
    sinc_half = 0.5 - angle * angle / 48.0;
  }
  Eigen::Quaterniond q;
  q.w() = std::cos(half);
  q.vec() = sinc_half * omega;
  return Rotation(q);
}

/// Logarithm map SO(3) -> so(3), inverse of so3_exp on |omega| < pi.
/// If the rotation angle is within 1e-6 of pi, *near_singular is set
/// (the returned vector is still the principal-branch value).
inline Eigen::Vector3d so3_log(const Rotation& r, bool* near_singular = nullptr) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // principal branch
  const double vec_norm = q.vec().norm();
  const double angle = 2.0 * std::atan2(vec_norm, q.w());
  if (near_singular != nullptr) {
    *near_singular = angle > M_PI - kNearPiMargin;
  }
  if (vec_norm < 0.5 * kSmallAngle) {
    return (2.0 / q.w()) * q.vec();
  }
  return (angle / vec_norm) * q.vec();
}

/// Right Jacobian of SO(3): Exp(omega + d) ~ Exp(omega) * Exp(Jr(omega) d).
inline Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Eigen::Matrix3d w = skew(omega);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() - 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  const double c1 = (1.0 - std::cos(theta)) / t2;
  const double c2 = (theta - std::sin(theta)) / (t2 * theta);
  return Eigen::Matrix3d::Identity() - c1 * w + c2 * w * w;
}

inline Eigen::Matrix3d so3_right_jacobian_inverse(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Eigen::Matrix3d w = skew(omega);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * w + (1.0 / 12.0) * w * w;
  }
  const double t2 = theta * theta;
  const double c = 1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * w + c * w * w;
}

/// Rigid transform: x -> rotation * x + translation.
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Rotation& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {}

  static Pose identity() { return Pose(); }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  Pose operator*(const Pose& rhs) const {
    return Pose(rotation * rhs.rotation, rotation * rhs.translation + translation);
  }

  Pose inverse() const {
    const Rotation rinv = rotation.inverse();
    return Pose(rinv, -(rinv * translation));
  }
};

}  // namespace aslio
