// Iterated error-state Kalman update with point-to-plane residuals.
//
// For a sensor point p^L with body-frame position p^I = T_L^I p^L, world
// prediction p^G = R p^I + t, and a plane (u, q) fitted to the point's map
// neighborhood, the scalar residual and measurement row are
//
//   z = u . (p^G - q)
//   H = [ -u^T R skew(p^I), u^T, 0_{1x12} ]
//
// The iterated update follows
//
//   K      = P H^T (H P H^T + R)^-1
//   x_{j+1} = x_j [+] ( -K z - (I - K H) A^-1 (x_j [-] x_prior) )
//
// with fixed P across iterations and A identity except for the rotation
// block, which is the right Jacobian of SO(3) at the anchored rotation error.
// The gain is evaluated in the literal form for small row counts and in the
// algebraically equivalent information form (H^T R^-1 H + P^-1) for large
// ones; both must agree to 1e-9.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "aslio/registration_map.hpp"
#include "aslio/state.hpp"

namespace aslio {

struct EskfConfig {
  int max_iterations = 5;
  double convergence_eps = 1e-3;   // |dx| threshold, mixed units
  double outlier_gate = 0.5;       // m, residual gate
  double point_noise_std = 0.02;   // m, per-point measurement noise
  int min_valid_points = 50;       // below this the update is skipped
  int knn_k = 5;
  double search_radius = 1.0;      // m
  double inlier_threshold = 0.1;   // m, plane validity
  double min_plane_spread = 0.05;  // m, minimum in-plane minor-axis spread
};

/// One scalar point-to-plane measurement. Columns 6..17 of H are exactly zero.
struct Measurement {
  double z = 0.0;                     // m, signed plane distance
  Eigen::Matrix<double, 1, 18> h = Eigen::Matrix<double, 1, 18>::Zero();
  double r = 0.0;                     // m^2, noise variance
};

/// Sensor-frame point with its window weight (1 for latest observations,
/// lower for historical ones); the weight inflates measurement noise.
struct WeightedPoint {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double weight = 1.0;
};

/// Builds the residual and Jacobian row for one point at the given state, or
/// nullopt when the neighborhood is insufficient, the plane is invalid, or
/// the residual exceeds the outlier gate.
inline std::optional<Measurement> residual_jacobian(const Eigen::Vector3d& point_sensor,
                                                    const NavState& state, const Pose& extrinsic,
                                                    const RegistrationMap& map,
                                                    const EskfConfig& cfg, double weight = 1.0) {
  const Eigen::Vector3d p_body = extrinsic * point_sensor;
  const Eigen::Vector3d p_world = state.rotation * p_body + state.position;

  const std::vector<Eigen::Vector3d> cluster = map.knn(p_world, cfg.knn_k, cfg.search_radius);
  if (static_cast<int>(cluster.size()) < cfg.knn_k) return std::nullopt;

  const PlaneFit plane = fit_plane(cluster, cfg.inlier_threshold);
  if (!plane.valid || plane.minor_spread < cfg.min_plane_spread) return std::nullopt;

  const double z = plane.normal.dot(p_world - plane.anchor);
  if (std::abs(z) > cfg.outlier_gate) return std::nullopt;

  Measurement m;
  m.z = z;
  m.h.block<1, 3>(0, kIdxTheta) =
      -plane.normal.transpose() * state.rotation.matrix() * skew(p_body);
  m.h.block<1, 3>(0, kIdxPos) = plane.normal.transpose();
  m.r = (cfg.point_noise_std * cfg.point_noise_std) / (weight * weight);
  return m;
}

struct GainResult {
  ErrorVector18 kz = ErrorVector18::Zero();      // K z
  Covariance18 kh = Covariance18::Zero();        // K H
};

/// Literal gain: K = P H^T (H P H^T + R)^-1. O(m^3); for test-scale systems.
inline GainResult kalman_gain_literal(const Covariance18& cov,
                                      std::span<const Measurement> measurements) {
  const int m = static_cast<int>(measurements.size());
  Eigen::MatrixXd h(m, 18);
  Eigen::VectorXd z(m);
  Eigen::VectorXd r(m);
  for (int i = 0; i < m; ++i) {
    h.row(i) = measurements[i].h;
    z(i) = measurements[i].z;
    r(i) = measurements[i].r;
  }
  Eigen::MatrixXd s = h * cov * h.transpose();
  s.diagonal() += r;
  const Eigen::MatrixXd k = cov * h.transpose() * s.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  GainResult out;
  out.kz = k * z;
  out.kh = k * h;
  return out;
}

/// Information-form gain: K H = (H^T R^-1 H + P^-1)^-1 H^T R^-1 H, and
/// K z likewise. Only the leading 6x6 of H^T R^-1 H is nonzero for
/// point-to-plane rows, so it is accumulated in 6 dimensions.
inline GainResult kalman_gain_information(const Covariance18& cov,
                                          std::span<const Measurement> measurements) {
  Eigen::Matrix<double, 6, 6> s6 = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b6 = Eigen::Matrix<double, 6, 1>::Zero();
  for (const auto& m : measurements) {
    const Eigen::Matrix<double, 6, 1> h6 = m.h.block<1, 6>(0, 0).transpose();
    const double inv_r = 1.0 / m.r;
    s6.noalias() += h6 * (inv_r * h6.transpose());
    b6.noalias() += h6 * (inv_r * m.z);
  }
  Covariance18 s = Covariance18::Zero();
  s.topLeftCorner<6, 6>() = s6;

  const Covariance18 p_inv = cov.ldlt().solve(Covariance18::Identity());
  const Eigen::LDLT<Covariance18> info((s + p_inv).eval());
  GainResult out;
  ErrorVector18 b = ErrorVector18::Zero();
  b.head<6>() = b6;
  out.kz = info.solve(b);
  out.kh = info.solve(s);
  return out;
}

// Row count above which the information form is used.
inline constexpr int kGainFormSwitch = 54;

inline GainResult kalman_gain(const Covariance18& cov, std::span<const Measurement> measurements) {
  return static_cast<int>(measurements.size()) <= kGainFormSwitch
             ? kalman_gain_literal(cov, measurements)
             : kalman_gain_information(cov, measurements);
}

struct UpdateReport {
  int iterations = 0;
  bool converged = false;
  double final_dx_norm = 0.0;
  int valid_points = 0;     // at the last evaluated iteration
  int rejected_points = 0;  // at the last evaluated iteration
  bool applied = false;     // false => degraded, prior carried forward
  std::vector<double> iteration_rms;  // residual rms per iteration
  // Covariance audit of the committed posterior.
  double prior_trace = 0.0;
  double posterior_trace = 0.0;
  double max_asymmetry = 0.0;
  double min_eigenvalue = 0.0;
};

struct UpdateResult {
  NavState state;
  Covariance18 cov;
  UpdateReport report;
};

/// Posterior covariance (I - K H) P, symmetrized. Throws when the result
/// loses positive semi-definiteness beyond -1e-8.
inline Covariance18 posterior_covariance(const Covariance18& prior, const Covariance18& kh) {
  Covariance18 post = (Covariance18::Identity() - kh) * prior;
  post = 0.5 * (post + post.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Covariance18> es(post);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw std::runtime_error("posterior_covariance: covariance lost positive semi-definiteness");
  return post;
}

/// Spec-shaped overload taking the explicit gain and measurement matrices.
inline Eigen::MatrixXd posterior_covariance(const Eigen::MatrixXd& prior, const Eigen::MatrixXd& k,
                                            const Eigen::MatrixXd& h) {
  Eigen::MatrixXd post =
      (Eigen::MatrixXd::Identity(prior.rows(), prior.cols()) - k * h) * prior;
  post = 0.5 * (post + post.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(post);
  if (es.eigenvalues().minCoeff() < -1e-8)
    throw std::runtime_error("posterior_covariance: covariance lost positive semi-definiteness");
  return post;
}

/// Iterated update over one frame. Residuals are rebuilt at every iterate;
/// the covariance is held fixed across iterations and committed once at the
/// end. When fewer than cfg.min_valid_points residuals survive, the update is
/// skipped and the prior is carried forward with the degradation flag set.
inline UpdateResult iterated_update(const NavState& prior, const Covariance18& prior_cov,
                                    std::span<const WeightedPoint> points, const Pose& extrinsic,
                                    const RegistrationMap& map, const EskfConfig& cfg) {
  UpdateResult out{prior, prior_cov, {}};
  out.report.prior_trace = prior_cov.trace();

  NavState x = prior;
  std::vector<Measurement> measurements;
  GainResult gain;
  bool have_gain = false;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    measurements.clear();
    measurements.reserve(points.size());
    int rejected = 0;
    double sq_sum = 0.0;
    for (const auto& wp : points) {
      auto m = residual_jacobian(wp.p, x, extrinsic, map, cfg, wp.weight);
      if (!m) {
        ++rejected;
        continue;
      }
      sq_sum += m->z * m->z;
      measurements.push_back(std::move(*m));
    }
    out.report.valid_points = static_cast<int>(measurements.size());
    out.report.rejected_points = rejected;

    if (out.report.valid_points < cfg.min_valid_points) {
      // Degraded: not enough constraints to determine the pose.
      out.state = prior;
      out.cov = prior_cov;
      out.report.applied = false;
      out.report.posterior_trace = prior_cov.trace();
      const Eigen::SelfAdjointEigenSolver<Covariance18> es(prior_cov);
      out.report.min_eigenvalue = es.eigenvalues().minCoeff();
      return out;
    }
    out.report.iteration_rms.push_back(
        std::sqrt(sq_sum / static_cast<double>(out.report.valid_points)));

    gain = kalman_gain(prior_cov, measurements);
    have_gain = true;

    ErrorVector18 anchored = boxminus(x, prior);
    anchored.segment<3>(kIdxTheta) =
        so3_right_jacobian_inverse(anchored.segment<3>(kIdxTheta)) *
        anchored.segment<3>(kIdxTheta);
    const ErrorVector18 dx = -gain.kz - (anchored - gain.kh * anchored);

    x = boxplus(x, dx);
    ++out.report.iterations;
    out.report.final_dx_norm = dx.norm();
    if (out.report.final_dx_norm < cfg.convergence_eps) {
      out.report.converged = true;
      break;
    }
  }

  out.state = x;
  out.report.applied = true;
  if (have_gain) {
    Covariance18 post = (Covariance18::Identity() - gain.kh) * prior_cov;
    out.report.max_asymmetry = (post - post.transpose()).cwiseAbs().maxCoeff();
    post = 0.5 * (post + post.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Covariance18> es(post);
    out.report.min_eigenvalue = es.eigenvalues().minCoeff();
    if (out.report.min_eigenvalue < -1e-8)
      throw std::runtime_error("iterated_update: posterior covariance lost PSD");
    out.cov = post;
  }
  out.report.posterior_trace = out.cov.trace();
  return out;
}

}  // namespace aslio
