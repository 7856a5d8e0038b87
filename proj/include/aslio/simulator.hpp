// Deterministic synthetic world, trajectory, LiDAR and IMU generation.
//
// Trajectories are planar (x, y, yaw) with analytic speed and yaw-rate
// profiles built from C1 smoothstep transitions, so the body angular rate
// and accelerometer signal have closed forms. Positions are the integral of
// the analytic velocity, evaluated from cached checkpoints with Gauss-
// Legendre quadrature (the integrands are piecewise-polynomial-in-smoothstep
// times trig, so the quadrature error is at rounding level).
//
// Every LiDAR ray is cast from the ground-truth pose at its own timestamp,
// so motion distortion is physically present in the generated streams.

#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aslio/geometry.hpp"
#include "aslio/imu.hpp"
#include "aslio/types.hpp"

namespace aslio {

inline constexpr double kGravityMagnitude = 9.81;

// ---------------------------------------------------------------------------
// Smoothstep profiles
// ---------------------------------------------------------------------------

/// One C1 transition: contributes delta * S((t - t0) / tau) to a profile,
/// with S the cubic smoothstep.
struct ProfileStep {
  double t0 = 0.0;
  double tau = 1.0;
  double delta = 0.0;
};

inline double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}

inline double smoothstep_derivative(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 6.0 * u * (1.0 - u);
}

/// Integral of smoothstep from 0 to u.
inline double smoothstep_integral(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return u - 0.5;
  return u * u * u * (1.0 - 0.5 * u);
}

inline double profile_value(std::span<const ProfileStep> steps, double t) {
  double v = 0.0;
  for (const auto& s : steps) v += s.delta * smoothstep((t - s.t0) / s.tau);
  return v;
}

inline double profile_derivative(std::span<const ProfileStep> steps, double t) {
  double v = 0.0;
  for (const auto& s : steps) v += s.delta / s.tau * smoothstep_derivative((t - s.t0) / s.tau);
  return v;
}

inline double profile_integral(std::span<const ProfileStep> steps, double t) {
  double v = 0.0;
  for (const auto& s : steps) v += s.delta * s.tau * smoothstep_integral((t - s.t0) / s.tau);
  return v;
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

/// Ground-truth kinematics at one instant. The accelerometer value is what an
/// ideal (noise- and bias-free) sensor would read, gravity reaction included.
struct GroundTruth {
  Pose pose;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();       // world, m/s
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();  // body, rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();           // body, m/s^2
};

class TrajectorySpec {
 public:
  Eigen::Vector3d start_position = Eigen::Vector3d::Zero();
  double start_yaw = 0.0;
  std::vector<ProfileStep> speed_steps;     // speed(t) = sum of steps
  std::vector<ProfileStep> yaw_rate_steps;  // w(t) = sum; yaw = integral
  double duration = 0.0;

  double speed(double t) const { return profile_value(speed_steps, t); }
  double speed_rate(double t) const { return profile_derivative(speed_steps, t); }
  double yaw_rate(double t) const { return profile_value(yaw_rate_steps, t); }
  double yaw(double t) const { return start_yaw + profile_integral(yaw_rate_steps, t); }

  /// Precomputes position checkpoints; must be called before ground_truth.
  void finalize() {
    const int n = static_cast<int>(std::ceil(duration / kCheckpointDt)) + 1;
    checkpoints_.assign(n + 1, Eigen::Vector2d::Zero());
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Vector2d comp = Eigen::Vector2d::Zero();  // Kahan compensation
    for (int i = 1; i <= n; ++i) {
      const Eigen::Vector2d inc =
          integrate_velocity((i - 1) * kCheckpointDt, std::min(i * kCheckpointDt, duration));
      const Eigen::Vector2d y = inc - comp;
      const Eigen::Vector2d t = sum + y;
      comp = (t - sum) - y;
      sum = t;
      checkpoints_[i] = sum;
    }
  }

  GroundTruth ground_truth(double t) const {
    if (t < 0.0 || t > duration)
      throw std::out_of_range("TrajectorySpec::ground_truth: t outside trajectory span");
    if (checkpoints_.empty())
      throw std::logic_error("TrajectorySpec::ground_truth: finalize() not called");

    const double psi = yaw(t);
    const double s = speed(t);
    const double sd = speed_rate(t);
    const double w = yaw_rate(t);
    const double c = std::cos(psi);
    const double sn = std::sin(psi);

    GroundTruth gt;
    gt.pose.rotation = Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ())));
    const Eigen::Vector2d xy = position_xy(t);
    gt.pose.translation = start_position + Eigen::Vector3d(xy.x(), xy.y(), 0.0);
    gt.velocity = Eigen::Vector3d(s * c, s * sn, 0.0);
    gt.angular_velocity = Eigen::Vector3d(0.0, 0.0, w);
    const Eigen::Vector3d accel_world(sd * c - s * w * sn, sd * sn + s * w * c, 0.0);
    const Eigen::Vector3d gravity(0.0, 0.0, -kGravityMagnitude);
    gt.accel = gt.pose.rotation.inverse() * (accel_world - gravity);
    return gt;
  }

 private:
  static constexpr double kCheckpointDt = 0.005;

  Eigen::Vector2d position_xy(double t) const {
    int idx = static_cast<int>(t / kCheckpointDt);
    idx = std::min<int>(idx, static_cast<int>(checkpoints_.size()) - 2);
    const double t_base = idx * kCheckpointDt;
    return checkpoints_[idx] + integrate_velocity(t_base, t);
  }

  Eigen::Vector2d integrate_velocity(double a, double b) const {
    // 8-point Gauss-Legendre on [a, b].
    static constexpr std::array<double, 8> kNodes = {
        0.019855071751231884, 0.101666761293186630, 0.237233795041835507,
        0.408282678752175098, 0.591717321247824902, 0.762766204958164493,
        0.898333238706813370, 0.980144928248768116};
    static constexpr std::array<double, 8> kWeights = {
        0.050614268145188130, 0.111190517226687235, 0.156853322938943644,
        0.181341891689180991, 0.181341891689180991, 0.156853322938943644,
        0.111190517226687235, 0.050614268145188130};
    const double h = b - a;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (int i = 0; i < 8; ++i) {
      const double t = a + h * kNodes[i];
      const double psi = yaw(t);
      sum += kWeights[i] * speed(t) * Eigen::Vector2d(std::cos(psi), std::sin(psi));
    }
    return h * sum;
  }

  std::vector<Eigen::Vector2d> checkpoints_;
};

/// Incremental trajectory construction with C1 speed and yaw-rate profiles.
/// Positions queried during construction come from a fine-step integration of
/// the profile built so far and are used to anchor legs to target lines.
class TrajectoryBuilder {
 public:
  TrajectoryBuilder(const Eigen::Vector3d& start_position, double start_yaw) {
    spec_.start_position = start_position;
    spec_.start_yaw = start_yaw;
  }

  double time() const { return t_; }
  double speed() const { return speed_; }

  /// Advances time with the current profile (standstill if speed is 0).
  TrajectoryBuilder& hold(double duration) {
    t_ += duration;
    return *this;
  }

  TrajectoryBuilder& cruise(double duration) { return hold(duration); }

  /// C1 speed change over `ramp` seconds.
  TrajectoryBuilder& ramp_speed(double target, double ramp) {
    spec_.speed_steps.push_back({t_, ramp, target - speed_});
    speed_ = target;
    t_ += ramp;
    return *this;
  }

  /// Yaw-rate pulse turning by `angle` over `duration`, with smoothstep
  /// ramps of `blend` seconds on both sides.
  TrajectoryBuilder& turn(double angle, double duration, double blend) {
    const double rate = angle / (duration - blend);
    spec_.yaw_rate_steps.push_back({t_, blend, rate});
    spec_.yaw_rate_steps.push_back({t_ + duration - blend, blend, -rate});
    t_ += duration;
    return *this;
  }

  /// Cruises along the current heading until the integrated position reaches
  /// the given x (respectively y) coordinate.
  TrajectoryBuilder& cruise_until_x(double x_target) { return cruise_until(0, x_target); }
  TrajectoryBuilder& cruise_until_y(double y_target) { return cruise_until(1, y_target); }

  Eigen::Vector2d position() const { return integrate_position(t_); }
  double yaw() const { return spec_.start_yaw + profile_integral(spec_.yaw_rate_steps, t_); }

  TrajectorySpec build(double trailing_hold = 0.0) {
    t_ += trailing_hold;
    spec_.duration = t_;
    spec_.finalize();
    return spec_;
  }

 private:
  TrajectoryBuilder& cruise_until(int axis, double target) {
    const Eigen::Vector2d pos = position();
    const double psi = yaw();
    const double dir = axis == 0 ? std::cos(psi) : std::sin(psi);
    const double rate = speed_ * dir;
    const double duration = (target - pos[axis]) / rate;
    if (!(duration > 0.0))
      throw std::logic_error("TrajectoryBuilder: cruise_until target not ahead");
    t_ += duration;
    return *this;
  }

  Eigen::Vector2d integrate_position(double t_end) const {
    // Midpoint rule at 1 kHz; construction-time placement only.
    constexpr double dt = 1e-3;
    Eigen::Vector2d pos = Eigen::Vector2d::Zero();
    double t = 0.0;
    while (t < t_end) {
      const double step = std::min(dt, t_end - t);
      const double tm = t + 0.5 * step;
      const double psi = spec_.start_yaw + profile_integral(spec_.yaw_rate_steps, tm);
      const double s = profile_value(spec_.speed_steps, tm);
      pos += step * s * Eigen::Vector2d(std::cos(psi), std::sin(psi));
      t += step;
    }
    return pos;
  }

  TrajectorySpec spec_;
  double t_ = 0.0;
  double speed_ = 0.0;
};

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

/// Finite rectangular patch: corner + two edge vectors. Patches are
/// two-sided for ray intersection.
struct Patch {
  Eigen::Vector3d corner;
  Eigen::Vector3d e1;
  Eigen::Vector3d e2;
  Eigen::Vector3d normal;  // unit, orientation arbitrary
  double g11, g12, g22, inv_det;

  Patch(const Eigen::Vector3d& c, const Eigen::Vector3d& a, const Eigen::Vector3d& b)
      : corner(c), e1(a), e2(b) {
    const Eigen::Vector3d n = e1.cross(e2);
    const double n2 = n.squaredNorm();
    if (n2 <= 0.0) throw std::invalid_argument("Patch: edge vectors must be independent");
    normal = n / std::sqrt(n2);
    g11 = e1.squaredNorm();
    g12 = e1.dot(e2);
    g22 = e2.squaredNorm();
    inv_det = 1.0 / (g11 * g22 - g12 * g12);
  }
};

class World {
 public:
  void add_patch(const Eigen::Vector3d& corner, const Eigen::Vector3d& e1,
                 const Eigen::Vector3d& e2) {
    patches_.emplace_back(corner, e1, e2);
  }

  /// Axis-aligned box expanded into its 6 face patches.
  void add_box(const Eigen::Vector3d& center, const Eigen::Vector3d& dims) {
    const Eigen::Vector3d h = 0.5 * dims;
    const Eigen::Vector3d lo = center - h;
    const Eigen::Vector3d dx(dims.x(), 0, 0), dy(0, dims.y(), 0), dz(0, 0, dims.z());
    add_patch(lo, dy, dz);                 // -x face
    add_patch(lo + dx, dy, dz);            // +x face
    add_patch(lo, dx, dz);                 // -y face
    add_patch(lo + dy, dx, dz);            // +y face
    add_patch(lo, dx, dy);                 // -z face
    add_patch(lo + dz, dx, dy);            // +z face
  }

  const std::vector<Patch>& patches() const { return patches_; }

  /// Rigidly translates every patch.
  void translate(const Eigen::Vector3d& offset) {
    for (auto& patch : patches_) patch.corner += offset;
  }

  /// Range to the nearest patch along a unit ray, within [min_range,
  /// max_range]. Rays parallel to a patch produce no return from it.
  std::optional<double> raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                double min_range, double max_range) const {
    double best = max_range;
    bool hit = false;
    for (const auto& patch : patches_) {
      const double denom = patch.normal.dot(dir);
      if (std::abs(denom) < 1e-12) continue;
      const double t = patch.normal.dot(patch.corner - origin) / denom;
      if (t < min_range || t > best) continue;
      const Eigen::Vector3d rel = origin + t * dir - patch.corner;
      const double d1 = rel.dot(patch.e1);
      const double d2 = rel.dot(patch.e2);
      const double a = (patch.g22 * d1 - patch.g12 * d2) * patch.inv_det;
      if (a < 0.0 || a > 1.0) continue;
      const double b = (patch.g11 * d2 - patch.g12 * d1) * patch.inv_det;
      if (b < 0.0 || b > 1.0) continue;
      best = t;
      hit = true;
    }
    if (!hit) return std::nullopt;
    return best;
  }

 private:
  std::vector<Patch> patches_;
};

/// Axis-aligned free-space rectangle for indoor plan construction.
struct FreeRect {
  double x0, x1, y0, y1;
};

/// Builds walls (and optionally floor/ceiling) around the union of free
/// rectangles. All rectangle coordinates should be multiples of `cell`.
/// Boundary faces between free and non-free cells become wall patches,
/// merged into maximal runs.
inline void add_indoor_area(World& world, std::span<const FreeRect> rects, double floor_z,
                            double wall_top_z, bool add_floor = true, bool add_ceiling = true,
                            double cell = 0.5) {
  double minx = rects[0].x0, maxx = rects[0].x1, miny = rects[0].y0, maxy = rects[0].y1;
  for (const auto& r : rects) {
    minx = std::min(minx, r.x0);
    maxx = std::max(maxx, r.x1);
    miny = std::min(miny, r.y0);
    maxy = std::max(maxy, r.y1);
  }
  const int nx = static_cast<int>(std::lround((maxx - minx) / cell));
  const int ny = static_cast<int>(std::lround((maxy - miny) / cell));

  auto free_cell = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= nx || j >= ny) return false;
    const double cx = minx + (i + 0.5) * cell;
    const double cy = miny + (j + 0.5) * cell;
    for (const auto& r : rects) {
      if (cx > r.x0 && cx < r.x1 && cy > r.y0 && cy < r.y1) return true;
    }
    return false;
  };

  const double wall_h = wall_top_z - floor_z;
  // Vertical walls on x = const lines (boundary between cell i-1 and i).
  for (int i = 0; i <= nx; ++i) {
    int run_start = -1;
    for (int j = 0; j <= ny; ++j) {
      const bool boundary = j < ny && (free_cell(i, j) != free_cell(i - 1, j));
      if (boundary && run_start < 0) run_start = j;
      if (!boundary && run_start >= 0) {
        world.add_patch(Eigen::Vector3d(minx + i * cell, miny + run_start * cell, floor_z),
                        Eigen::Vector3d(0, (j - run_start) * cell, 0),
                        Eigen::Vector3d(0, 0, wall_h));
        run_start = -1;
      }
    }
  }
  // Vertical walls on y = const lines.
  for (int j = 0; j <= ny; ++j) {
    int run_start = -1;
    for (int i = 0; i <= nx; ++i) {
      const bool boundary = i < nx && (free_cell(i, j) != free_cell(i, j - 1));
      if (boundary && run_start < 0) run_start = i;
      if (!boundary && run_start >= 0) {
        world.add_patch(Eigen::Vector3d(minx + run_start * cell, miny + j * cell, floor_z),
                        Eigen::Vector3d((i - run_start) * cell, 0, 0),
                        Eigen::Vector3d(0, 0, wall_h));
        run_start = -1;
      }
    }
  }
  // Floor / ceiling: greedy cover of the free region with maximal rectangles.
  if (add_floor || add_ceiling) {
    struct Strip {
      int i0, i1, j0, j1;
    };
    std::vector<Strip> strips;
    std::vector<std::vector<char>> used(nx, std::vector<char>(ny, 0));
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (!free_cell(i, j) || used[i][j]) continue;
        int i1 = i;
        while (i1 + 1 < nx && free_cell(i1 + 1, j) && !used[i1 + 1][j]) ++i1;
        int j1 = j;
        bool grow = true;
        while (grow && j1 + 1 < ny) {
          for (int k = i; k <= i1; ++k) {
            if (!free_cell(k, j1 + 1) || used[k][j1 + 1]) {
              grow = false;
              break;
            }
          }
          // Only grow when the row above starts/ends exactly at the strip.
          if (grow && (free_cell(i - 1, j1 + 1) || free_cell(i1 + 1, j1 + 1))) grow = false;
          if (grow) ++j1;
        }
        for (int jj = j; jj <= j1; ++jj)
          for (int k = i; k <= i1; ++k) used[k][jj] = 1;
        strips.push_back({i, i1, j, j1});
      }
    }
    for (const auto& s : strips) {
      const Eigen::Vector3d e1((s.i1 - s.i0 + 1) * cell, 0, 0);
      const Eigen::Vector3d e2(0, (s.j1 - s.j0 + 1) * cell, 0);
      const double x = minx + s.i0 * cell;
      const double y = miny + s.j0 * cell;
      if (add_floor) world.add_patch(Eigen::Vector3d(x, y, floor_z), e1, e2);
      if (add_ceiling) world.add_patch(Eigen::Vector3d(x, y, wall_top_z), e1, e2);
    }
  }
}

// ---------------------------------------------------------------------------
// Sensors
// ---------------------------------------------------------------------------

enum class ScanPattern { kRaster, kRosette };

struct LidarModel {
  double horizontal_fov_deg = 70.0;   // in (0, 360]
  double vertical_fov_deg = 30.0;
  ScanPattern pattern = ScanPattern::kRaster;
  double points_per_second = 100000.0;
  double min_range = 0.3;             // m
  double max_range = 40.0;            // m
  double range_noise_std = 0.02;      // m
  int raster_lines = 10;
  double raster_line_rate = 100.0;    // lines per second
  double rosette_f1 = 137.31;         // Hz, azimuth
  double rosette_f2 = 19.477;         // Hz, elevation
  Pose extrinsic;                     // T_L^I (sensor in body frame)

  /// Ray direction in the sensor frame at stream time t.
  Eigen::Vector3d ray_direction(double t) const {
    const double h = horizontal_fov_deg * M_PI / 180.0;
    const double v = vertical_fov_deg * M_PI / 180.0;
    double az, el;
    if (pattern == ScanPattern::kRaster) {
      const double phase = t * raster_line_rate;
      const double line_frac = phase - std::floor(phase);
      const auto line = static_cast<std::int64_t>(std::floor(phase));
      const int row = static_cast<int>(line % raster_lines);
      az = -0.5 * h + h * line_frac;
      el = raster_lines > 1 ? -0.5 * v + v * row / (raster_lines - 1.0) : 0.0;
    } else {
      az = 0.5 * h * std::sin(2.0 * M_PI * rosette_f1 * t);
      el = 0.5 * v * std::sin(2.0 * M_PI * rosette_f2 * t);
    }
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  }
};

/// Simulates the LiDAR over [t0, t1): one ray per 1/points_per_second, cast
/// from the ground-truth sensor pose at the ray's own timestamp. Returns
/// sensor-frame points; misses are omitted. Same seed, same stream.
inline std::vector<TimedPoint> scan(const World& world, const TrajectorySpec& traj,
                                    const LidarModel& lidar, double t0, double t1,
                                    std::uint64_t seed) {
  if (!(t1 > t0)) throw std::invalid_argument("scan: t1 must be > t0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<TimedPoint> points;
  const double dt = 1.0 / lidar.points_per_second;
  const auto count = static_cast<std::int64_t>((t1 - t0) / dt);
  points.reserve(count / 2);
  for (std::int64_t i = 0; i < count; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    if (t > traj.duration) break;
    const GroundTruth gt = traj.ground_truth(t);
    const Pose sensor_pose = gt.pose * lidar.extrinsic;
    const Eigen::Vector3d dir_sensor = lidar.ray_direction(t);
    const Eigen::Vector3d dir_world = sensor_pose.rotation * dir_sensor;
    const auto range = world.raycast(sensor_pose.translation, dir_world, lidar.min_range,
                                     lidar.max_range);
    if (!range) continue;
    const double r = *range + lidar.range_noise_std * noise(rng);
    points.push_back({t, dir_sensor * r});
  }
  return points;
}

/// Synthesizes IMU samples over the trajectory span at the given rate. The
/// discrete per-sample noise std is sigma_continuous * sqrt(rate), matching
/// the filter's Q = diag(sigma^2) * dt discretization.
inline std::vector<ImuSample> imu_stream(const TrajectorySpec& traj, double rate,
                                         const NoiseParams& noise,
                                         const Eigen::Vector3d& gyro_bias,
                                         const Eigen::Vector3d& accel_bias, std::uint64_t seed) {
  if (!(rate > 0.0)) throw std::invalid_argument("imu_stream: rate must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sg = noise.sigma_gyro * std::sqrt(rate);
  const double sa = noise.sigma_accel * std::sqrt(rate);

  std::vector<ImuSample> samples;
  const auto count = static_cast<std::int64_t>(traj.duration * rate) + 1;
  samples.reserve(count);
  for (std::int64_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / rate;
    if (t > traj.duration) break;
    const GroundTruth gt = traj.ground_truth(t);
    ImuSample s;
    s.t = t;
    s.gyro = gt.angular_velocity + gyro_bias +
             sg * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    s.accel = gt.accel + accel_bias + sa * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    samples.push_back(s);
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct TimeWindow {
  std::string label;
  double t0 = 0.0;
  double t1 = 0.0;
};

/// A fully parameterized deterministic scenario. The seed only drives sensor
/// noise; world and trajectory are fixed per name.
struct Scenario {
  std::string name;
  World world;
  TrajectorySpec trajectory;
  LidarModel lidar;
  NoiseParams imu_noise;
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  double imu_rate = 200.0;
  std::uint64_t seed = 0;
  std::vector<TimeWindow> events;  // labeled "turn" / "occlusion" windows

  std::uint64_t scan_seed() const { return seed * 2654435761ull + 1; }
  std::uint64_t imu_seed() const { return seed * 2654435761ull + 2; }

  std::vector<TimedPoint> generate_scan() const {
    return scan(world, trajectory, lidar, 0.0, trajectory.duration, scan_seed());
  }
  std::vector<ImuSample> generate_imu() const {
    return imu_stream(trajectory, imu_rate, imu_noise, gyro_bias, accel_bias, imu_seed());
  }
};

namespace detail {

// Scenario plans are laid out on a convenient 0.5 m grid; shifting the whole
// scene off that grid keeps surfaces away from voxel boundaries (a
// grid-aligned plane would let range noise flip points across a boundary on
// every frame, which no real building exhibits).
inline const Eigen::Vector3d kSceneOffset(0.053, 0.071, 0.037);

inline void shift_scene(Scenario& sc) {
  sc.world.translate(kSceneOffset);
  sc.trajectory.start_position += kSceneOffset;
}

inline Scenario corridor_sharp_turns(std::uint64_t seed) {
  Scenario sc;
  sc.name = "corridor_sharp_turns";
  sc.seed = seed;

  const std::vector<FreeRect> plan = {
      {-2.0, 15.5, -1.5, 1.5},   // C1 east, centerline y = 0
      {12.5, 15.5, -1.5, 11.5},  // C2 north, centerline x = 14
      {12.5, 27.5, 8.5, 11.5},   // C3 east, centerline y = 10
      {24.5, 27.5, 8.5, 15.0},   // C4 connector, centerline x = 26
      {12.5, 27.5, 12.0, 15.0},  // C5 west, centerline y = 13.5
      {12.5, 15.5, 12.0, 26.0},  // C6 north, centerline x = 14
  };
  add_indoor_area(sc.world, plan, 0.0, 3.0);

  const double turn_t = 0.55, blend = 0.25;
  TrajectoryBuilder b(Eigen::Vector3d(0.0, 0.0, 1.2), 0.0);
  b.hold(1.0).ramp_speed(2.0, 0.6);
  b.cruise_until_x(13.3);
  double t0 = b.time();
  b.turn(M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise_until_y(9.3);
  t0 = b.time();
  b.turn(-M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise_until_x(25.3);
  t0 = b.time();
  // 180-degree switchback through the connector: two left turns back to back.
  b.turn(M_PI / 2, turn_t, blend);
  b.cruise_until_y(12.8);
  b.turn(M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise_until_x(14.7);
  t0 = b.time();
  b.turn(-M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise_until_y(22.0);
  b.ramp_speed(0.0, 0.5);
  sc.trajectory = b.build(0.3);

  sc.lidar.horizontal_fov_deg = 70.0;
  sc.lidar.pattern = ScanPattern::kRosette;
  sc.lidar.vertical_fov_deg = 30.0;
  sc.lidar.max_range = 35.0;
  sc.lidar.range_noise_std = 0.02;
  sc.imu_noise = NoiseParams{};
  sc.gyro_bias = Eigen::Vector3d(0.005, -0.004, 0.008);
  sc.accel_bias = Eigen::Vector3d(0.05, -0.03, 0.04);
  shift_scene(sc);
  return sc;
}

inline Scenario closed_loop_rect(std::uint64_t seed) {
  Scenario sc;
  sc.name = "closed_loop_rect";
  sc.seed = seed;

  // Walled yard with an inner block; the path circles the block. Outdoor:
  // no ceiling.
  const std::vector<FreeRect> plan = {
      {5.0, 75.0, 5.0, 20.0},    // south band
      {5.0, 75.0, 35.0, 50.0},   // north band
      {5.0, 20.0, 20.0, 35.0},   // west band
      {60.0, 75.0, 20.0, 35.0},  // east band
  };
  add_indoor_area(sc.world, plan, 0.0, 5.0, /*add_floor=*/true, /*add_ceiling=*/false);
  sc.world.add_box(Eigen::Vector3d(25.0, 15.0, 1.5), Eigen::Vector3d(0.8, 0.8, 3.0));
  sc.world.add_box(Eigen::Vector3d(55.0, 15.5, 1.5), Eigen::Vector3d(0.8, 0.8, 3.0));
  sc.world.add_box(Eigen::Vector3d(65.0, 25.0, 1.5), Eigen::Vector3d(0.8, 0.8, 3.0));
  sc.world.add_box(Eigen::Vector3d(40.0, 40.5, 1.5), Eigen::Vector3d(0.8, 0.8, 3.0));
  sc.world.add_box(Eigen::Vector3d(15.0, 25.0, 1.5), Eigen::Vector3d(0.8, 0.8, 3.0));

  // Symmetric loop: leg durations chosen so the exact-arithmetic displacement
  // cancels (the ramp covers v*ramp/2 = 1 m, compensated on the west leg),
  // and four identical turn pulses whose displacements cancel by symmetry.
  const double v = 2.5, ramp = 0.8, turn_t = 1.2, blend = 0.5;
  TrajectoryBuilder b(Eigen::Vector3d(10.0, 10.0, 1.5), 0.0);
  b.hold(1.0).ramp_speed(v, ramp);
  b.cruise(22.8);                       // east: 1 + 57 m
  double t0 = b.time();
  b.turn(M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise(13.2);                       // north: 33 m
  t0 = b.time();
  b.turn(M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise(23.2);                       // west: 58 m
  t0 = b.time();
  b.turn(M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  b.cruise(13.2);                       // south: 33 m
  t0 = b.time();
  b.turn(M_PI / 2, turn_t, blend);
  sc.events.push_back({"turn", t0, b.time()});
  sc.trajectory = b.build();

  sc.lidar.horizontal_fov_deg = 360.0;
  sc.lidar.pattern = ScanPattern::kRosette;
  sc.lidar.vertical_fov_deg = 30.0;
  sc.lidar.max_range = 45.0;
  sc.lidar.min_range = 0.5;
  sc.lidar.range_noise_std = 0.02;
  sc.imu_noise = NoiseParams{};
  sc.gyro_bias = Eigen::Vector3d(0.004, -0.006, 0.005);
  sc.accel_bias = Eigen::Vector3d(0.04, 0.05, -0.03);
  shift_scene(sc);
  return sc;
}

inline Scenario doorway_occlusion(std::uint64_t seed) {
  Scenario sc;
  sc.name = "doorway_occlusion";
  sc.seed = seed;

  // Room A and a large room B joined by a thick-walled doorway (a short
  // tunnel), so the passage genuinely starves the registration.
  const double door_hw = 0.45;   // door half-width
  const double door_h = 2.2;     // door height
  const double ax1 = 12.0;       // A-side divider face
  const double bx0 = 18.0;       // B-side divider face
  auto& w = sc.world;
  // Room A shell (x in [0, 12], y in [-7, 7], z in [0, 3]).
  w.add_patch({0, -7, 0}, {0, 14, 0}, {0, 0, 3});                       // west wall
  w.add_patch({0, -7, 0}, {ax1, 0, 0}, {0, 0, 3});                      // south wall
  w.add_patch({0, 7, 0}, {ax1, 0, 0}, {0, 0, 3});                       // north wall
  w.add_patch({0, -7, 0}, {ax1, 0, 0}, {0, 14, 0});                     // floor A
  w.add_patch({0, -7, 3}, {ax1, 0, 0}, {0, 14, 0});                     // ceiling A
  // Divider faces with the door opening.
  for (const double x : {ax1, bx0}) {
    w.add_patch({x, -7, 0}, {0, 7 - door_hw, 0}, {0, 0, 3});            // below-door side
    w.add_patch({x, door_hw, 0}, {0, 7 - door_hw, 0}, {0, 0, 3});       // above-door side
    w.add_patch({x, -door_hw, door_h}, {0, 2 * door_hw, 0}, {0, 0, 3 - door_h});  // lintel
  }
  // Tunnel interior.
  w.add_patch({ax1, -door_hw, 0}, {bx0 - ax1, 0, 0}, {0, 0, door_h});   // tunnel south
  w.add_patch({ax1, door_hw, 0}, {bx0 - ax1, 0, 0}, {0, 0, door_h});    // tunnel north
  w.add_patch({ax1, -door_hw, door_h}, {bx0 - ax1, 0, 0}, {0, 2 * door_hw, 0});  // tunnel top
  w.add_patch({ax1, -door_hw, 0}, {bx0 - ax1, 0, 0}, {0, 2 * door_hw, 0});       // tunnel floor
  // Room B shell (x in [18, 40], y in [-11, 11]).
  w.add_patch({40, -11, 0}, {0, 22, 0}, {0, 0, 3});                     // east wall
  w.add_patch({bx0, -11, 0}, {40 - bx0, 0, 0}, {0, 0, 3});              // south wall
  w.add_patch({bx0, 11, 0}, {40 - bx0, 0, 0}, {0, 0, 3});               // north wall
  w.add_patch({bx0, -11, 0}, {40 - bx0, 0, 0}, {0, 22, 0});             // floor B
  w.add_patch({bx0, -11, 3}, {40 - bx0, 0, 0}, {0, 22, 0});             // ceiling B

  TrajectoryBuilder b(Eigen::Vector3d(4.0, 0.0, 1.2), 0.0);
  b.hold(1.0).ramp_speed(1.5, 0.5);
  const double t_enter = b.time() + (ax1 - 1.0 - b.position().x()) / 1.5;
  b.cruise_until_x(34.0);
  const double t_exit = t_enter + (bx0 - ax1 + 3.0) / 1.5;
  b.ramp_speed(0.0, 0.5);
  sc.trajectory = b.build(0.5);
  sc.events.push_back({"occlusion", t_enter, t_exit});

  sc.lidar.horizontal_fov_deg = 360.0;
  sc.lidar.pattern = ScanPattern::kRosette;
  sc.lidar.vertical_fov_deg = 30.0;
  sc.lidar.max_range = 30.0;
  sc.lidar.range_noise_std = 0.015;
  sc.imu_noise = NoiseParams{};
  sc.gyro_bias = Eigen::Vector3d(0.003, 0.004, -0.005);
  sc.accel_bias = Eigen::Vector3d(0.03, -0.04, 0.05);
  shift_scene(sc);
  return sc;
}

inline Scenario smooth_room(std::uint64_t seed) {
  Scenario sc;
  sc.name = "smooth_room";
  sc.seed = seed;

  const std::vector<FreeRect> plan = {{-8.0, 8.0, -6.0, 6.0}};
  add_indoor_area(sc.world, plan, 0.0, 3.0);

  // Gentle oval: slow straights and wide half-turns, 360-degree sensor.
  const double v = 0.8;
  TrajectoryBuilder b(Eigen::Vector3d(-3.0, -1.5, 1.2), 0.0);
  b.hold(1.0).ramp_speed(v, 0.6);
  b.cruise(4.0);
  b.turn(M_PI, 6.0, 1.5);
  b.cruise(4.0);
  b.turn(M_PI, 6.0, 1.5);
  b.cruise(2.0);
  b.ramp_speed(0.0, 0.5);
  sc.trajectory = b.build(0.5);

  sc.lidar.horizontal_fov_deg = 360.0;
  sc.lidar.pattern = ScanPattern::kRosette;
  sc.lidar.vertical_fov_deg = 30.0;
  sc.lidar.max_range = 25.0;
  sc.lidar.range_noise_std = 0.015;
  sc.imu_noise = NoiseParams{};
  sc.gyro_bias = Eigen::Vector3d(0.002, -0.003, 0.004);
  sc.accel_bias = Eigen::Vector3d(0.02, 0.03, -0.02);
  shift_scene(sc);
  return sc;
}

}  // namespace detail

inline Scenario make_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "corridor_sharp_turns") return detail::corridor_sharp_turns(seed);
  if (name == "closed_loop_rect") return detail::closed_loop_rect(seed);
  if (name == "doorway_occlusion") return detail::doorway_occlusion(seed);
  if (name == "smooth_room") return detail::smooth_room(seed);
  throw std::invalid_argument("unknown scenario: " + name);
}

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"corridor_sharp_turns", "closed_loop_rect",
                                                 "doorway_occlusion", "smooth_room"};
  return names;
}

}  // namespace aslio
