// IMU forward propagation of the nominal state and its 18x18 error-state
// covariance, plus per-point motion-distortion compensation (deskew).
//
// Discretization: zero-order hold on IMU inputs. The error-state transition
// F_a is the exact Jacobian of the discrete nominal map (including the
// 1/2 dt^2 position terms), with the rotation block handled through the
// right Jacobian of SO(3). Process noise Q is diagonal, scaled by dt.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aslio/state.hpp"
#include "aslio/types.hpp"

namespace aslio {

struct ImuSample {
  double t = 0.0;                                    // s
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();    // omega_m, rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();   // a_m, m/s^2
};

/// Continuous-time noise densities (per sqrt(Hz)).
struct NoiseParams {
  double sigma_gyro = 2e-3;        // rad/s/sqrt(Hz)
  double sigma_accel = 2e-2;       // m/s^2/sqrt(Hz)
  double sigma_gyro_bias = 1e-4;   // rad/s^2/sqrt(Hz)
  double sigma_accel_bias = 1e-3;  // m/s^3/sqrt(Hz)
};

struct PoseLogEntry {
  double t = 0.0;
  NavState state;
};

/// States recorded at every IMU sample time across one propagation span.
using PoseLog = std::vector<PoseLogEntry>;

/// Error-state transition matrix F_a for one ZOH step.
inline Covariance18 error_transition(const NavState& x, const ImuSample& u, double dt) {
  const Eigen::Vector3d w = u.gyro - x.gyro_bias;
  const Eigen::Vector3d a = u.accel - x.accel_bias;
  const Eigen::Matrix3d r = x.rotation.matrix();
  const Eigen::Matrix3d r_skew_a = r * skew(a);
  const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
  const double half_dt2 = 0.5 * dt * dt;

  Covariance18 f = Covariance18::Identity();
  f.block<3, 3>(kIdxTheta, kIdxTheta) = so3_exp(w * dt).matrix().transpose();
  f.block<3, 3>(kIdxTheta, kIdxGyroBias) = -so3_right_jacobian(w * dt) * dt;
  f.block<3, 3>(kIdxPos, kIdxTheta) = -r_skew_a * half_dt2;
  f.block<3, 3>(kIdxPos, kIdxVel) = eye * dt;
  f.block<3, 3>(kIdxPos, kIdxAccelBias) = -r * half_dt2;
  f.block<3, 3>(kIdxPos, kIdxGravity) = eye * half_dt2;
  f.block<3, 3>(kIdxVel, kIdxTheta) = -r_skew_a * dt;
  f.block<3, 3>(kIdxVel, kIdxAccelBias) = -r * dt;
  f.block<3, 3>(kIdxVel, kIdxGravity) = eye * dt;
  return f;
}

/// Noise input matrix F_n for one step; noise order [n_w, n_a, n_bw, n_ba].
inline Eigen::Matrix<double, 18, 12> noise_transition(const NavState& x, const ImuSample& u,
                                                      double dt) {
  const Eigen::Vector3d w = u.gyro - x.gyro_bias;
  const Eigen::Matrix3d r = x.rotation.matrix();

  Eigen::Matrix<double, 18, 12> f = Eigen::Matrix<double, 18, 12>::Zero();
  f.block<3, 3>(kIdxTheta, 0) = -so3_right_jacobian(w * dt);
  f.block<3, 3>(kIdxPos, 3) = -r * 0.5 * dt;
  f.block<3, 3>(kIdxVel, 3) = -r;
  f.block<3, 3>(kIdxGyroBias, 6) = Eigen::Matrix3d::Identity();
  f.block<3, 3>(kIdxAccelBias, 9) = Eigen::Matrix3d::Identity();
  return f;
}

struct PropagateResult {
  NavState state;
  Covariance18 cov;
};

/// One propagation step: integrates the nominal state with bias-corrected
/// rates and gravity, and propagates the covariance through F_a / F_n.
inline PropagateResult propagate(const NavState& x, const Covariance18& cov, const ImuSample& u,
                                 double dt, const NoiseParams& noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate: dt must be > 0");
  if (!u.gyro.allFinite() || !u.accel.allFinite())
    throw std::invalid_argument("propagate: non-finite IMU sample");

  const Eigen::Vector3d w = u.gyro - x.gyro_bias;
  const Eigen::Vector3d a_world = x.rotation * (u.accel - x.accel_bias) + x.gravity;

  PropagateResult out;
  out.state = x;
  out.state.rotation = x.rotation * so3_exp(w * dt);
  out.state.position = x.position + x.velocity * dt + 0.5 * a_world * dt * dt;
  out.state.velocity = x.velocity + a_world * dt;

  const Covariance18 fa = error_transition(x, u, dt);
  const Eigen::Matrix<double, 18, 12> fn = noise_transition(x, u, dt);
  Eigen::Matrix<double, 12, 1> q_diag;
  q_diag << Eigen::Vector3d::Constant(noise.sigma_gyro * noise.sigma_gyro),
      Eigen::Vector3d::Constant(noise.sigma_accel * noise.sigma_accel),
      Eigen::Vector3d::Constant(noise.sigma_gyro_bias * noise.sigma_gyro_bias),
      Eigen::Vector3d::Constant(noise.sigma_accel_bias * noise.sigma_accel_bias);
  q_diag *= dt;

  Covariance18 p = fa * cov * fa.transpose();
  p.noalias() += fn * q_diag.asDiagonal() * fn.transpose();
  out.cov = 0.5 * (p + p.transpose());
  return out;
}

struct SpanResult {
  NavState state;
  Covariance18 cov;
  PoseLog log;
};

/// Chains single-step propagation across [t0, t1], holding the most recent
/// sample at each sub-interval. The PoseLog records the state at t0, at every
/// interior sample time and at t1. Throws when the sample spacing inside the
/// span exceeds 5x the median spacing (dropped IMU data).
inline SpanResult propagate_span(const NavState& x0, const Covariance18& cov0,
                                 std::span<const ImuSample> samples, double t0, double t1,
                                 const NoiseParams& noise) {
  if (samples.empty()) throw std::runtime_error("propagate_span: no IMU samples");
  if (t1 < t0) throw std::invalid_argument("propagate_span: t1 < t0");

  SpanResult out{x0, cov0, {}};
  out.log.push_back({t0, x0});
  if (t1 == t0) return out;

  std::vector<double> gaps;
  gaps.reserve(samples.size());
  for (std::size_t i = 1; i < samples.size(); ++i) gaps.push_back(samples[i].t - samples[i - 1].t);
  double median_gap = 0.0;
  if (!gaps.empty()) {
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    median_gap = gaps[gaps.size() / 2];
  }

  // Index of the sample active (ZOH) at t0.
  std::size_t idx = 0;
  while (idx + 1 < samples.size() && samples[idx + 1].t <= t0) ++idx;

  double t = t0;
  while (t < t1) {
    double t_next = t1;
    if (idx + 1 < samples.size() && samples[idx + 1].t < t1 && samples[idx + 1].t > t) {
      t_next = samples[idx + 1].t;
    }
    const double dt = t_next - t;
    if (median_gap > 0.0 && dt > 5.0 * median_gap) {
      throw std::runtime_error("propagate_span: IMU gap of " + std::to_string(dt) + " s at t=" +
                               std::to_string(t));
    }
    const PropagateResult step = propagate(out.state, out.cov, samples[idx], dt, noise);
    out.state = step.state;
    out.cov = step.cov;
    out.log.push_back({t_next, out.state});
    t = t_next;
    while (idx + 1 < samples.size() && samples[idx + 1].t <= t) ++idx;
  }
  return out;
}

/// Pose at time t interpolated between log entries: spherical-linear in
/// rotation, linear in translation. t must lie within the log span.
inline Pose interpolate_pose(const PoseLog& log, double t) {
  if (log.empty()) throw std::invalid_argument("interpolate_pose: empty log");
  if (t <= log.front().t) return log.front().state.pose();
  if (t >= log.back().t) return log.back().state.pose();

  std::size_t hi = 1;
  while (log[hi].t < t) ++hi;
  const auto& a = log[hi - 1];
  const auto& b = log[hi];
  const double span = b.t - a.t;
  const double alpha = span > 0.0 ? (t - a.t) / span : 1.0;
  const Eigen::Quaterniond q =
      a.state.rotation.quaternion().slerp(alpha, b.state.rotation.quaternion());
  const Eigen::Vector3d p = (1.0 - alpha) * a.state.position + alpha * b.state.position;
  return Pose(Rotation(q), p);
}

struct DeskewResult {
  std::vector<TimedPoint> points;  // world frame, timestamps preserved
  int rejected = 0;                // timestamps outside the log span
};

/// Motion compensation: each sensor-frame point is transformed to the world
/// frame through the interpolated pose at its own timestamp composed with the
/// LiDAR-to-IMU extrinsic.
inline DeskewResult deskew(std::span<const TimedPoint> points, const PoseLog& log,
                           const Pose& extrinsic, double end_time) {
  if (log.empty()) throw std::invalid_argument("deskew: empty pose log");
  if (end_time < log.front().t || end_time > log.back().t)
    throw std::invalid_argument("deskew: end_time outside log span");

  DeskewResult out;
  out.points.reserve(points.size());
  for (const auto& pt : points) {
    if (pt.t < log.front().t || pt.t > log.back().t) {
      ++out.rejected;
      continue;
    }
    const Pose body = interpolate_pose(log, pt.t);
    out.points.push_back({pt.t, body * (extrinsic * pt.p)});
  }
  return out;
}

}  // namespace aslio
