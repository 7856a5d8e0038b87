// End-to-end pipeline: ingest -> window extraction -> IMU propagation and
// deskew -> iterated ESKF update -> SOD computation -> map merge, with the
// SOD of each posterior-aligned frame driving the next window step.
//
// Historical window points enter the update in their previously committed
// world coordinates, re-projected once per update into the sensor frame at
// the propagated prior (so they move rigidly with the iterated estimate).

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aslio/eskf.hpp"
#include "aslio/imu.hpp"
#include "aslio/io.hpp"
#include "aslio/overlap_map.hpp"
#include "aslio/registration_map.hpp"
#include "aslio/sliding_window.hpp"
#include "aslio/state.hpp"
#include "aslio/types.hpp"

namespace aslio {

enum class PipelineMode { kAdaptive, kFixedWindow };

/// Initial error-state standard deviations.
struct InitialUncertainty {
  double theta = 0.02;       // rad
  double position = 0.02;    // m
  double velocity = 0.05;    // m/s
  double gyro_bias = 0.01;   // rad/s
  double accel_bias = 0.05;  // m/s^2
  double gravity = 0.05;     // m/s^2
};

struct PipelineConfig {
  // SOD occupancy map.
  double sod_voxel_size = 0.2;
  int sod_margin_extent = 3;
  std::vector<double> sod_beta;  // empty -> default_beta(margin_extent)
  MarginMetric sod_metric = MarginMetric::kChebyshev;
  double sod_crop_radius = 0.0;  // 0 = unbounded map

  WindowConfig window;

  // Registration map.
  double reg_voxel_size = 0.5;
  int reg_max_points_per_voxel = 20;
  double reg_downsample_leaf = 0.25;

  EskfConfig eskf;
  NoiseParams imu_noise;
  InitialUncertainty initial_sigma;
  Pose extrinsic;  // T_L^I

  PipelineMode mode = PipelineMode::kAdaptive;
  double init_window = 0.5;        // s of standstill data for initialization
  bool init_moving = false;        // initialize from ground truth instead
  int abort_after_degraded = 20;   // consecutive degraded updates before abort

  void validate() const {
    window.validate();
    if (!(sod_voxel_size > 0.0)) throw std::invalid_argument("sod.voxel_size must be > 0");
    if (sod_margin_extent < 0) throw std::invalid_argument("sod.margin_extent must be >= 0");
    if (!(reg_voxel_size > 0.0)) throw std::invalid_argument("registration.voxel_size must be > 0");
    if (!(reg_downsample_leaf > 0.0))
      throw std::invalid_argument("registration.downsample_leaf must be > 0");
    if (init_window < window.frame_length)
      throw std::invalid_argument("pipeline.init_window must be >= window.frame_length");
  }

  std::vector<double> beta() const {
    return sod_beta.empty() ? default_beta(sod_margin_extent) : sod_beta;
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value for " + key + ": '" + value + "'");
  }
}

inline int to_int(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v != std::floor(v)) throw std::runtime_error("config: expected integer for " + key);
  return static_cast<int>(v);
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::runtime_error("config: expected true/false for " + key);
}

inline std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string token;
  while (std::getline(ss, token, ',')) out.push_back(to_double(key, token));
  return out;
}

}  // namespace detail

/// Applies "section.key = value" entries; unknown keys are rejected.
inline void apply_key_values(PipelineConfig& cfg,
                             std::span<const std::pair<std::string, std::string>> entries) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  using detail::to_list;
  for (const auto& [key, value] : entries) {
    if (key == "sod.voxel_size") cfg.sod_voxel_size = to_double(key, value);
    else if (key == "sod.margin_extent") cfg.sod_margin_extent = to_int(key, value);
    else if (key == "sod.beta") cfg.sod_beta = to_list(key, value);
    else if (key == "sod.metric") {
      if (value == "chebyshev") cfg.sod_metric = MarginMetric::kChebyshev;
      else if (value == "manhattan") cfg.sod_metric = MarginMetric::kManhattan;
      else throw std::runtime_error("config: sod.metric must be chebyshev or manhattan");
    } else if (key == "sod.crop_radius") cfg.sod_crop_radius = to_double(key, value);
    else if (key == "window.frame_length") cfg.window.frame_length = to_double(key, value);
    else if (key == "window.seg_step") cfg.window.seg_step = to_double(key, value);
    else if (key == "window.min_shift") cfg.window.min_shift = to_double(key, value);
    else if (key == "window.history_weight_factor")
      cfg.window.history_weight_factor = to_double(key, value);
    else if (key == "registration.voxel_size") cfg.reg_voxel_size = to_double(key, value);
    else if (key == "registration.max_points_per_voxel")
      cfg.reg_max_points_per_voxel = to_int(key, value);
    else if (key == "registration.downsample_leaf") cfg.reg_downsample_leaf = to_double(key, value);
    else if (key == "eskf.max_iterations") cfg.eskf.max_iterations = to_int(key, value);
    else if (key == "eskf.convergence_eps") cfg.eskf.convergence_eps = to_double(key, value);
    else if (key == "eskf.outlier_gate") cfg.eskf.outlier_gate = to_double(key, value);
    else if (key == "eskf.point_noise_std") cfg.eskf.point_noise_std = to_double(key, value);
    else if (key == "eskf.min_valid_points") cfg.eskf.min_valid_points = to_int(key, value);
    else if (key == "eskf.knn_k") cfg.eskf.knn_k = to_int(key, value);
    else if (key == "eskf.search_radius") cfg.eskf.search_radius = to_double(key, value);
    else if (key == "eskf.inlier_threshold") cfg.eskf.inlier_threshold = to_double(key, value);
    else if (key == "imu.sigma_gyro") cfg.imu_noise.sigma_gyro = to_double(key, value);
    else if (key == "imu.sigma_accel") cfg.imu_noise.sigma_accel = to_double(key, value);
    else if (key == "imu.sigma_gyro_bias") cfg.imu_noise.sigma_gyro_bias = to_double(key, value);
    else if (key == "imu.sigma_accel_bias") cfg.imu_noise.sigma_accel_bias = to_double(key, value);
    else if (key == "init.sigma_theta") cfg.initial_sigma.theta = to_double(key, value);
    else if (key == "init.sigma_position") cfg.initial_sigma.position = to_double(key, value);
    else if (key == "init.sigma_velocity") cfg.initial_sigma.velocity = to_double(key, value);
    else if (key == "init.sigma_gyro_bias") cfg.initial_sigma.gyro_bias = to_double(key, value);
    else if (key == "init.sigma_accel_bias") cfg.initial_sigma.accel_bias = to_double(key, value);
    else if (key == "init.sigma_gravity") cfg.initial_sigma.gravity = to_double(key, value);
    else if (key == "extrinsic.translation") {
      const auto v = to_list(key, value);
      if (v.size() != 3) throw std::runtime_error("config: extrinsic.translation needs x,y,z");
      cfg.extrinsic.translation = Eigen::Vector3d(v[0], v[1], v[2]);
    } else if (key == "extrinsic.quaternion") {
      const auto v = to_list(key, value);
      if (v.size() != 4) throw std::runtime_error("config: extrinsic.quaternion needs x,y,z,w");
      cfg.extrinsic.rotation = Rotation(Eigen::Quaterniond(v[3], v[0], v[1], v[2]));
    } else if (key == "pipeline.mode") {
      if (value == "adaptive") cfg.mode = PipelineMode::kAdaptive;
      else if (value == "fixed" || value == "fixed_window") cfg.mode = PipelineMode::kFixedWindow;
      else throw std::runtime_error("config: pipeline.mode must be adaptive or fixed");
    } else if (key == "pipeline.init_window") cfg.init_window = to_double(key, value);
    else if (key == "pipeline.init_moving") cfg.init_moving = to_bool(key, value);
    else if (key == "pipeline.abort_after_degraded") cfg.abort_after_degraded = to_int(key, value);
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

/// One committed state update.
struct TrajectoryRecord {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  double overlap = 0.0;  // SOD of this update's frame
  int seg_time = 1;
  double shift_time = 0.0;
  int echo_time = 1;
  int iterations = 0;
  int valid_points = 0;
  bool degraded = false;
  std::int64_t wall_us = 0;
};

struct RunMetrics {
  bool has_ground_truth = false;
  double end_to_end_error = 0.0;  // m
  double ate_rms = 0.0;           // m
  double mean_update_rate = 0.0;  // Hz, from shift times
  double max_update_rate = 0.0;   // Hz
  double mean_update_wall = 0.0;  // s
  double total_wall = 0.0;        // s
  std::int64_t updates = 0;
  std::int64_t degraded_updates = 0;
};

struct RunResult {
  std::vector<TrajectoryRecord> records;
  std::vector<UpdateReport> reports;  // parallel to records
  RunMetrics metrics;
  NavState final_state;
  int status = 0;  // 0 ok, 1 input error, 2 degradation abort
  std::string message;
};

/// Optional instrumentation hook: phase is one of "propagate", "update",
/// "sod", "merge", "plan"; t is the cycle's end time.
using PhaseObserver = std::function<void(std::string_view phase, double t)>;

/// Pose interpolated from a TUM series (slerp / lerp); t clamped to the span.
inline Pose interpolate_tum(std::span<const TumPose> poses, double t) {
  if (poses.empty()) throw std::invalid_argument("interpolate_tum: empty series");
  if (t <= poses.front().t)
    return Pose(Rotation(poses.front().orientation), poses.front().position);
  if (t >= poses.back().t) return Pose(Rotation(poses.back().orientation), poses.back().position);
  std::size_t hi = 1;
  while (poses[hi].t < t) ++hi;
  const auto& a = poses[hi - 1];
  const auto& b = poses[hi];
  const double alpha = (t - a.t) / (b.t - a.t);
  return Pose(Rotation(a.orientation.slerp(alpha, b.orientation)),
              (1.0 - alpha) * a.position + alpha * b.position);
}

namespace detail {

inline std::size_t lower_index(std::span<const TimedPoint> pts, double t) {
  // First index with pts[i].t > t.
  std::size_t lo = 0, hi = pts.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (pts[mid].t <= t) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

}  // namespace detail

/// Runs the full pipeline over preloaded streams. Ground truth, when given,
/// anchors the initial pose (shared initial frame for evaluation) and is
/// required for init_moving.
inline RunResult run(const PipelineConfig& cfg, std::span<const TimedPoint> points,
                     std::span<const ImuSample> imu, std::span<const TumPose> ground_truth = {},
                     const PhaseObserver& observer = {}) {
  cfg.validate();
  RunResult result;
  const auto t_run_start = std::chrono::steady_clock::now();

  if (points.empty() || imu.empty()) {
    result.status = 1;
    result.message = "empty input stream";
    return result;
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].t < points[i - 1].t) {
      result.status = 1;
      result.message = "points stream not time-ordered at t=" + std::to_string(points[i].t);
      return result;
    }
  }
  const double t_start = std::max(points.front().t, imu.front().t);
  const double t_init_end = t_start + cfg.init_window;
  if (points.back().t < t_init_end || imu.back().t < t_init_end) {
    result.status = 1;
    result.message = "streams end before initialization window at t=" + std::to_string(t_init_end);
    return result;
  }
  if (cfg.init_moving && ground_truth.empty()) {
    result.status = 1;
    result.message = "init_moving requires ground truth";
    return result;
  }

  // --- Initialization -----------------------------------------------------
  NavState state;
  if (!ground_truth.empty()) {
    const Pose p0 = interpolate_tum(ground_truth, t_init_end);
    state.rotation = p0.rotation;
    state.position = p0.translation;
  }
  if (cfg.init_moving) {
    const double h = 0.01;
    const Pose pa = interpolate_tum(ground_truth, t_init_end - h);
    const Pose pb = interpolate_tum(ground_truth, t_init_end + h);
    state.velocity = (pb.translation - pa.translation) / (2.0 * h);
    state.gravity = Eigen::Vector3d(0, 0, -9.81);
  } else {
    // Standstill assumption over the init window.
    Eigen::Vector3d gyro_sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d accel_sum = Eigen::Vector3d::Zero();
    std::int64_t n = 0;
    for (const auto& s : imu) {
      if (s.t < t_start) continue;
      if (s.t > t_init_end) break;
      gyro_sum += s.gyro;
      accel_sum += s.accel;
      ++n;
    }
    if (n < 2) {
      result.status = 1;
      result.message = "no IMU samples in initialization window";
      return result;
    }
    state.gyro_bias = gyro_sum / static_cast<double>(n);
    state.gravity = -(state.rotation * (accel_sum / static_cast<double>(n)));
  }

  Covariance18 cov = Covariance18::Zero();
  const auto& s0 = cfg.initial_sigma;
  cov.diagonal() << Eigen::Vector3d::Constant(s0.theta * s0.theta),
      Eigen::Vector3d::Constant(s0.position * s0.position),
      Eigen::Vector3d::Constant(s0.velocity * s0.velocity),
      Eigen::Vector3d::Constant(s0.gyro_bias * s0.gyro_bias),
      Eigen::Vector3d::Constant(s0.accel_bias * s0.accel_bias),
      Eigen::Vector3d::Constant(s0.gravity * s0.gravity);

  OccupancyVoxelMap occupancy(cfg.sod_voxel_size, cfg.sod_margin_extent, cfg.beta(),
                              cfg.sod_metric);
  RegistrationMap registration(cfg.reg_voxel_size, cfg.reg_max_points_per_voxel);
  std::deque<TimedPoint> history;  // committed world points of past windows
  // Persistent merge filter: one registration point per downsample leaf,
  // across all frames. Re-observed surfaces must not stack near-duplicate
  // points in the buckets (degenerate KNN clusters break the plane fits).
  std::unordered_set<VoxelKey, VoxelKeyHash> merged_leaves;
  auto merge_new_leaves = [&](const PointCloud& world) {
    PointCloud fresh;
    for (const auto& p : world) {
      if (merged_leaves.insert(voxel_key(p, cfg.reg_downsample_leaf)).second)
        fresh.push_back(p);
    }
    registration.merge(fresh);
  };

  // --- Bootstrap: first window at the initial pose, O treated as 1 ---------
  {
    const std::size_t i0 = detail::lower_index(points, t_init_end - cfg.window.frame_length);
    const std::size_t i1 = detail::lower_index(points, t_init_end);
    const Pose sensor_pose = state.pose() * cfg.extrinsic;
    PointCloud world;
    world.reserve(i1 - i0);
    for (std::size_t i = i0; i < i1; ++i) world.push_back(sensor_pose * points[i].p);
    if (world.empty()) {
      result.status = 1;
      result.message = "no points in bootstrap window ending at t=" + std::to_string(t_init_end);
      return result;
    }
    occupancy.insert(world);
    PointCloud ds;
    std::unordered_map<VoxelKey, char, VoxelKeyHash> seen;
    for (std::size_t i = 0; i < world.size(); ++i) {
      if (seen.try_emplace(voxel_key(world[i], cfg.reg_downsample_leaf), 1).second) {
        ds.push_back(world[i]);
        history.push_back({points[i0 + i].t, world[i]});
      }
    }
    merge_new_leaves(ds);
  }

  WindowController controller(cfg.window);
  controller.reset(1.0);
  const StepPlan fixed_plan{2, cfg.window.frame_length, 1};

  double prev_end = t_init_end;
  double prev_overlap = 1.0;
  std::size_t imu_begin = 0;
  int consecutive_degraded = 0;
  double wall_sum = 0.0;

  // --- Main loop ------------------------------------------------------------
  while (true) {
    const StepPlan plan = cfg.mode == PipelineMode::kFixedWindow ? fixed_plan : controller.current();
    const double end = prev_end + plan.shift_time;
    if (points.back().t < end || imu.back().t < end) break;  // stream exhausted

    const auto t_cycle_start = std::chrono::steady_clock::now();

    // Latest interval (prev_end, end].
    const std::size_t li0 = detail::lower_index(points, prev_end);
    const std::size_t li1 = detail::lower_index(points, end);
    std::span<const TimedPoint> latest(points.data() + li0, li1 - li0);

    // IMU sub-span: from the sample holding at prev_end through end.
    while (imu_begin + 1 < imu.size() && imu[imu_begin + 1].t <= prev_end) ++imu_begin;
    std::size_t imu_end = imu_begin;
    while (imu_end + 1 < imu.size() && imu[imu_end].t < end) ++imu_end;
    std::span<const ImuSample> imu_span(imu.data() + imu_begin, imu_end - imu_begin + 1);

    SpanResult prior;
    try {
      prior = propagate_span(state, cov, imu_span, prev_end, end, cfg.imu_noise);
    } catch (const std::exception& e) {
      result.status = 1;
      result.message = std::string(e.what()) + " (cycle ending at t=" + std::to_string(end) + ")";
      break;
    }
    if (observer) observer("propagate", end);

    TrajectoryRecord rec;
    rec.t = end;
    rec.seg_time = plan.seg_time;
    rec.shift_time = plan.shift_time;
    rec.echo_time = plan.echo_time;

    UpdateReport report;
    double overlap_value = 0.0;

    if (latest.empty()) {
      // Total occlusion of the latest interval: skip the update, carry prior.
      state = prior.state;
      cov = prior.cov;
      report.applied = false;
      report.prior_trace = prior.cov.trace();
      report.posterior_trace = prior.cov.trace();
      if (observer) {
        observer("update", end);
        observer("sod", end);
        observer("merge", end);
      }
    } else {
      // Deskew to world under the prior trajectory, then express every point
      // in the sensor frame at the window end.
      const DeskewResult dsk = deskew(latest, prior.log, cfg.extrinsic, end);
      const Pose prior_sensor = prior.state.pose() * cfg.extrinsic;
      const Pose prior_sensor_inv = prior_sensor.inverse();
      std::vector<Eigen::Vector3d> latest_sensor;
      latest_sensor.reserve(dsk.points.size());
      for (const auto& tp : dsk.points) latest_sensor.push_back(prior_sensor_inv * tp.p);

      // Residual set: downsampled latest (weight 1) + reprojected history.
      std::vector<std::size_t> ds_indices;
      {
        std::unordered_map<VoxelKey, char, VoxelKeyHash> seen;
        seen.reserve(latest_sensor.size());
        for (std::size_t i = 0; i < latest_sensor.size(); ++i) {
          if (seen.try_emplace(voxel_key(dsk.points[i].p, cfg.reg_downsample_leaf), 1).second)
            ds_indices.push_back(i);
        }
      }
      std::vector<WeightedPoint> constraints;
      constraints.reserve(ds_indices.size() + history.size());
      for (const std::size_t i : ds_indices) constraints.push_back({latest_sensor[i], 1.0});
      // Historical constraints, deduplicated per leaf (consecutive short
      // windows re-commit the same surface); newest observation wins. They
      // are auxiliary: their weight scales with how far the overlap has
      // dropped, so a healthy frame is not dragged by its own past.
      const double hist_start = end - cfg.window.frame_length;
      const double overlap_scale = std::min(1.0, 2.0 * (1.0 - prev_overlap));
      if (overlap_scale > 0.0) {
        std::unordered_map<VoxelKey, char, VoxelKeyHash> taken;
        for (auto it = history.rbegin(); it != history.rend(); ++it) {
          if (it->t > prev_end) continue;
          if (it->t <= hist_start) break;
          if (!taken.try_emplace(voxel_key(it->p, cfg.reg_downsample_leaf), 1).second) continue;
          constraints.push_back({prior_sensor_inv * it->p,
                                 overlap_scale * history_weight(end - it->t, cfg.window)});
        }
      }

      UpdateResult upd = iterated_update(prior.state, prior.cov, constraints, cfg.extrinsic,
                                         registration, cfg.eskf);
      if (!upd.report.applied && overlap_scale < 1.0 && !history.empty()) {
        // Starved frame after a healthy one: re-run with history fully
        // engaged before conceding degradation.
        constraints.resize(ds_indices.size());
        std::unordered_map<VoxelKey, char, VoxelKeyHash> taken;
        for (auto it = history.rbegin(); it != history.rend(); ++it) {
          if (it->t > prev_end) continue;
          if (it->t <= hist_start) break;
          if (!taken.try_emplace(voxel_key(it->p, cfg.reg_downsample_leaf), 1).second) continue;
          constraints.push_back(
              {prior_sensor_inv * it->p, history_weight(end - it->t, cfg.window)});
        }
        upd = iterated_update(prior.state, prior.cov, constraints, cfg.extrinsic, registration,
                              cfg.eskf);
      }
      state = upd.state;
      cov = upd.cov;
      report = upd.report;
      if (observer) observer("update", end);

      // SOD of the posterior-aligned latest points, before any merge.
      const Pose posterior_sensor = state.pose() * cfg.extrinsic;
      overlap_value = occupancy.overlap(latest_sensor, posterior_sensor).value;
      if (observer) observer("sod", end);

      // Merge into both maps under the posterior pose and commit history.
      PointCloud world_all;
      world_all.reserve(latest_sensor.size());
      for (const auto& p : latest_sensor) world_all.push_back(posterior_sensor * p);
      occupancy.insert(world_all);
      if (cfg.sod_crop_radius > 0.0) occupancy.crop(state.position, cfg.sod_crop_radius);
      PointCloud world_ds;
      world_ds.reserve(ds_indices.size());
      for (const std::size_t i : ds_indices) world_ds.push_back(world_all[i]);
      merge_new_leaves(world_ds);
      for (std::size_t k = 0; k < ds_indices.size(); ++k) {
        history.push_back({dsk.points[ds_indices[k]].t, world_ds[k]});
      }
      if (observer) observer("merge", end);
    }

    while (!history.empty() && history.front().t <= end - cfg.window.frame_length)
      history.pop_front();

    rec.overlap = overlap_value;
    rec.iterations = report.iterations;
    rec.valid_points = report.valid_points;
    rec.degraded = !report.applied;
    rec.position = state.position;
    rec.orientation = state.rotation.quaternion();
    rec.wall_us = std::chrono::duration_cast<std::chrono::microseconds>(
                      std::chrono::steady_clock::now() - t_cycle_start)
                      .count();
    wall_sum += static_cast<double>(rec.wall_us) * 1e-6;
    result.records.push_back(rec);
    result.reports.push_back(report);

    if (rec.degraded) {
      if (++consecutive_degraded > cfg.abort_after_degraded) {
        result.status = 2;
        result.message = "degradation abort: " + std::to_string(consecutive_degraded) +
                         " consecutive updates below minimum valid points at t=" +
                         std::to_string(end);
        break;
      }
    } else {
      consecutive_degraded = 0;
    }

    controller.on_update(overlap_value);
    if (observer) observer("plan", end);

    prev_overlap = overlap_value;
    prev_end = end;
  }

  result.final_state = state;

  // --- Metrics --------------------------------------------------------------
  auto& m = result.metrics;
  m.updates = static_cast<std::int64_t>(result.records.size());
  for (const auto& r : result.records) {
    const double rate = 1.0 / r.shift_time;
    m.mean_update_rate += rate;
    m.max_update_rate = std::max(m.max_update_rate, rate);
    if (r.degraded) ++m.degraded_updates;
  }
  if (m.updates > 0) m.mean_update_rate /= static_cast<double>(m.updates);
  if (m.updates > 0) m.mean_update_wall = wall_sum / static_cast<double>(m.updates);
  m.total_wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run_start)
                     .count();
  return result;
}

/// Trajectory-error metrics against a TUM ground-truth series. Associates
/// records to ground truth by nearest timestamp within 5 ms; no alignment is
/// applied (the runs share the initial frame).
inline RunMetrics evaluate(std::span<const TrajectoryRecord> records,
                           std::span<const TumPose> ground_truth) {
  if (records.empty() || ground_truth.empty())
    throw std::invalid_argument("evaluate: empty trajectory");

  constexpr double kMaxAssocGap = 0.005;
  double sq_sum = 0.0;
  std::int64_t associated = 0;
  for (const auto& rec : records) {
    // Nearest ground-truth pose by timestamp.
    std::size_t lo = 0, hi = ground_truth.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (ground_truth[mid].t < rec.t) lo = mid + 1;
      else hi = mid;
    }
    std::size_t best = std::min(lo, ground_truth.size() - 1);
    if (lo > 0 && std::abs(ground_truth[lo - 1].t - rec.t) < std::abs(ground_truth[best].t - rec.t))
      best = lo - 1;
    if (std::abs(ground_truth[best].t - rec.t) > kMaxAssocGap) continue;
    sq_sum += (rec.position - ground_truth[best].position).squaredNorm();
    ++associated;
  }
  if (associated == 0) throw std::runtime_error("evaluate: no associable timestamps");

  RunMetrics m;
  m.has_ground_truth = true;
  m.updates = static_cast<std::int64_t>(records.size());
  m.ate_rms = std::sqrt(sq_sum / static_cast<double>(associated));
  const Pose gt_final = interpolate_tum(ground_truth, records.back().t);
  m.end_to_end_error = (records.back().position - gt_final.translation).norm();
  return m;
}

/// One voxel size's SOD series from a sweep.
struct SweepSeries {
  double voxel_size = 0.0;
  std::vector<double> t;
  std::vector<double> overlap;
};

/// SOD sensitivity sweep: recomputes the frame-to-map SOD along a given pose
/// series (ground-truth or estimated) for each voxel size, with fixed
/// frame_length stepping so every series shares one timestamp column.
inline std::vector<SweepSeries> sod_sweep(const PipelineConfig& cfg,
                                          std::span<const TimedPoint> points,
                                          std::span<const TumPose> poses,
                                          std::span<const double> voxel_sizes) {
  if (voxel_sizes.size() < 2) throw std::invalid_argument("sod_sweep: need at least 2 sizes");
  if (points.empty() || poses.empty()) throw std::invalid_argument("sod_sweep: empty input");

  const double fl = cfg.window.frame_length;
  const double t_begin = std::max(points.front().t, poses.front().t) + cfg.init_window;
  const double t_last = std::min(points.back().t, poses.back().t);

  std::vector<SweepSeries> series;
  for (const double size : voxel_sizes) {
    OccupancyVoxelMap map(size, cfg.sod_margin_extent, cfg.beta(), cfg.sod_metric);
    SweepSeries s;
    s.voxel_size = size;
    bool seeded = false;
    for (double end = t_begin; end <= t_last; end += fl) {
      const std::size_t i0 = detail::lower_index(points, end - fl);
      const std::size_t i1 = detail::lower_index(points, end);
      if (i1 <= i0) continue;
      PointCloud world;
      world.reserve(i1 - i0);
      for (std::size_t i = i0; i < i1; ++i) {
        const Pose body = interpolate_tum(poses, points[i].t);
        world.push_back(body * (cfg.extrinsic * points[i].p));
      }
      if (seeded) {
        s.t.push_back(end);
        s.overlap.push_back(map.overlap(world, Pose::identity()).value);
      }
      map.insert(world);
      seeded = true;
    }
    series.push_back(std::move(s));
  }
  return series;
}

// --- Output writers ---------------------------------------------------------

inline void write_trajectory_tum(const std::string& path,
                                 std::span<const TrajectoryRecord> records) {
  std::vector<TumPose> poses;
  poses.reserve(records.size());
  for (const auto& r : records) poses.push_back({r.t, r.position, r.orientation});
  write_tum(path, poses);
}

inline void write_updates_csv(const std::string& path, std::span<const TrajectoryRecord> records,
                              bool include_wall_time = false) {
  auto os = detail::open_out(path);
  os << "t,O,seg_time,shift_time,echo_time,iterations,valid_points,wall_us\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%.6f,%.6f,%d,%.6f,%d,%d,%d,%lld\n", r.t, r.overlap,
                  r.seg_time, r.shift_time, r.echo_time, r.iterations, r.valid_points,
                  include_wall_time ? static_cast<long long>(r.wall_us) : 0ll);
    os << line;
  }
}

inline void write_sweep_csv(const std::string& path, const SweepSeries& s) {
  auto os = detail::open_out(path);
  os << "t,O\n";
  char line[96];
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.6f,%.6f\n", s.t[i], s.overlap[i]);
    os << line;
  }
}

}  // namespace aslio
