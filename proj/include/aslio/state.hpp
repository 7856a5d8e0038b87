// Full estimator state and its 18-dof error-state parameterization.
//
// Error ordering is fixed: [dtheta, dp, dv, dbg, dba, dg]. The rotation
// block uses a right (body-frame) perturbation: R_true = R_hat * Exp(dtheta),
// which is the convention the measurement Jacobians assume.

#pragma once

#include <Eigen/Core>

#include "aslio/geometry.hpp"

namespace aslio {

using ErrorVector18 = Eigen::Matrix<double, 18, 1>;
using Covariance18 = Eigen::Matrix<double, 18, 18>;

// Error-vector block offsets.
inline constexpr int kIdxTheta = 0;
inline constexpr int kIdxPos = 3;
inline constexpr int kIdxVel = 6;
inline constexpr int kIdxGyroBias = 9;
inline constexpr int kIdxAccelBias = 12;
inline constexpr int kIdxGravity = 15;
inline constexpr int kErrorDim = 18;

/// Orientation, position, velocity, IMU biases and gravity of the IMU body
/// in the global frame.
struct NavState {
  Rotation rotation;                                        // R_I^G
  Eigen::Vector3d position = Eigen::Vector3d::Zero();       // p_I^G, m
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();       // v_I, m/s
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();      // rad/s
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();     // m/s^2
  Eigen::Vector3d gravity = Eigen::Vector3d(0, 0, -9.81);   // g^G, m/s^2

  Pose pose() const { return Pose(rotation, position); }
};

/// Manifold retraction: rotation composed through so3_exp, vector blocks
/// added componentwise.
inline NavState boxplus(const NavState& x, const ErrorVector18& delta) {
  NavState out = x;
  out.rotation = x.rotation * so3_exp(delta.segment<3>(kIdxTheta));
  out.position += delta.segment<3>(kIdxPos);
  out.velocity += delta.segment<3>(kIdxVel);
  out.gyro_bias += delta.segment<3>(kIdxGyroBias);
  out.accel_bias += delta.segment<3>(kIdxAccelBias);
  out.gravity += delta.segment<3>(kIdxGravity);
  return out;
}

/// Left inverse of boxplus anchored at b: boxplus(b, boxminus(a, b)) == a.
/// Sets *near_singular when the relative rotation angle is within 1e-6 of pi.
inline ErrorVector18 boxminus(const NavState& a, const NavState& b,
                              bool* near_singular = nullptr) {
  ErrorVector18 delta;
  delta.segment<3>(kIdxTheta) = so3_log(b.rotation.inverse() * a.rotation, near_singular);
  delta.segment<3>(kIdxPos) = a.position - b.position;
  delta.segment<3>(kIdxVel) = a.velocity - b.velocity;
  delta.segment<3>(kIdxGyroBias) = a.gyro_bias - b.gyro_bias;
  delta.segment<3>(kIdxAccelBias) = a.accel_bias - b.accel_bias;
  delta.segment<3>(kIdxGravity) = a.gravity - b.gravity;
  return delta;
}

}  // namespace aslio
