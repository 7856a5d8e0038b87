#include <gtest/gtest.h>

#include <numeric>

#include "aslio/overlap_map.hpp"
#include "aslio/simulator.hpp"

using namespace aslio;

namespace {

TrajectorySpec straight_line(double speed, double duration) {
  TrajectoryBuilder b(Eigen::Vector3d::Zero(), 0.0);
  b.ramp_speed(speed, 0.4);
  b.hold(duration);
  return b.build();
}

/// Ground-truth-aligned SOD series at fixed frame stepping.
std::vector<std::pair<double, double>> gt_sod_series(const Scenario& sc, double voxel_size,
                                                     double frame_length, double rate_override) {
  Scenario copy = sc;
  copy.lidar.points_per_second = rate_override;
  const auto points = copy.generate_scan();

  OccupancyVoxelMap map(voxel_size, 3);
  std::vector<std::pair<double, double>> series;
  bool seeded = false;
  std::size_t i = 0;
  for (double end = frame_length; end <= sc.trajectory.duration; end += frame_length) {
    PointCloud world;
    while (i < points.size() && points[i].t <= end) {
      const GroundTruth gt = sc.trajectory.ground_truth(points[i].t);
      world.push_back(gt.pose * (sc.lidar.extrinsic * points[i].p));
      ++i;
    }
    if (world.empty()) continue;
    if (seeded) series.emplace_back(end, map.overlap(world, Pose::identity()).value);
    map.insert(world);
    seeded = true;
  }
  return series;
}

}  // namespace

TEST(GroundTruth, StraightSegmentReadsGravityOnly) {
  const TrajectorySpec traj = straight_line(2.0, 3.0);
  const GroundTruth gt = traj.ground_truth(2.0);  // cruising
  EXPECT_LT(gt.angular_velocity.norm(), 1e-12);
  EXPECT_LT((gt.accel - Eigen::Vector3d(0, 0, kGravityMagnitude)).norm(), 1e-9);
  EXPECT_NEAR(gt.velocity.norm(), 2.0, 1e-9);
}

TEST(GroundTruth, PureTurnCentripetalAcceleration) {
  TrajectoryBuilder b(Eigen::Vector3d::Zero(), 0.0);
  b.ramp_speed(2.0, 0.4);
  b.hold(1.0);
  b.turn(M_PI, 4.0, 1.0);  // long plateau
  const TrajectorySpec traj = b.build(1.0);

  // Mid-turn: plateau yaw rate = pi / (4 - 1) s.
  const double t_mid = 0.4 + 1.0 + 2.0;
  const GroundTruth gt = traj.ground_truth(t_mid);
  const double w = M_PI / 3.0;
  EXPECT_NEAR(gt.angular_velocity.z(), w, 1e-9);
  // Lateral (y in body frame) acceleration = v * w; z reads gravity.
  EXPECT_NEAR(std::abs(gt.accel.y()), 2.0 * w, 1e-9);
  EXPECT_NEAR(gt.accel.z(), kGravityMagnitude, 1e-9);
}

TEST(GroundTruth, DerivativesMatchFiniteDifferences) {
  Scenario sc = make_scenario("corridor_sharp_turns", 0);
  const TrajectorySpec& traj = sc.trajectory;
  const double h = 5e-4;  // 1 kHz sampling
  // Sampling grid offset keeps probes away from profile breakpoints, where
  // the second derivative jumps and central differences lose an order.
  for (double t = 1.0171; t < traj.duration - 1.0; t += traj.duration / 40.0) {
    const GroundTruth gt = traj.ground_truth(t);
    const GroundTruth lo = traj.ground_truth(t - h);
    const GroundTruth hi = traj.ground_truth(t + h);

    const Eigen::Vector3d v_fd = (hi.pose.translation - lo.pose.translation) / (2.0 * h);
    EXPECT_LT((v_fd - gt.velocity).norm(), 1e-4) << "t=" << t;

    const Eigen::Vector3d a_fd_world = (hi.velocity - lo.velocity) / (2.0 * h);
    const Eigen::Vector3d a_world =
        gt.pose.rotation * gt.accel + Eigen::Vector3d(0, 0, -kGravityMagnitude);
    EXPECT_LT((a_fd_world - a_world).norm(), 1e-4) << "t=" << t;

    const Eigen::Vector3d dtheta = so3_log(lo.pose.rotation.inverse() * hi.pose.rotation);
    EXPECT_LT((dtheta / (2.0 * h) - gt.angular_velocity).norm(), 1e-4) << "t=" << t;
  }
}

TEST(GroundTruth, OutOfRangeThrows) {
  const TrajectorySpec traj = straight_line(1.0, 1.0);
  EXPECT_THROW(traj.ground_truth(-0.1), std::out_of_range);
  EXPECT_THROW(traj.ground_truth(traj.duration + 0.1), std::out_of_range);
}

TEST(Scan, StationarySensorSingleWall) {
  World world;
  world.add_patch({5.0, -10.0, -10.0}, {0.0, 20.0, 0.0}, {0.0, 0.0, 20.0});
  TrajectoryBuilder b(Eigen::Vector3d::Zero(), 0.0);
  b.hold(0.5);
  const TrajectorySpec traj = b.build();

  LidarModel lidar;
  lidar.horizontal_fov_deg = 20.0;
  lidar.vertical_fov_deg = 10.0;
  lidar.range_noise_std = 0.0;
  lidar.points_per_second = 10000.0;
  lidar.max_range = 20.0;

  const auto points = scan(world, traj, lidar, 0.0, 0.4, 7);
  ASSERT_GT(points.size(), 1000u);
  for (const auto& p : points) {
    // Ray hits the plane x = 5: range = 5 / dir.x.
    const Eigen::Vector3d dir = p.p.normalized();
    EXPECT_NEAR(p.p.norm(), 5.0 / dir.x(), 1e-9);
    EXPECT_NEAR(p.p.x(), 5.0, 1e-9);
  }
}

TEST(Scan, RayParallelToPatchMisses) {
  World world;
  world.add_patch({-10.0, -10.0, 0.0}, {20.0, 0.0, 0.0}, {0.0, 20.0, 0.0});  // z=0 plane
  TrajectoryBuilder b(Eigen::Vector3d(0, 0, 0.0), 0.0);
  b.hold(0.5);
  const TrajectorySpec traj = b.build();

  LidarModel lidar;
  lidar.vertical_fov_deg = 360.0 * 0.0;  // degenerate: all rays horizontal
  lidar.raster_lines = 1;
  lidar.horizontal_fov_deg = 90.0;
  const auto points = scan(world, traj, lidar, 0.0, 0.3, 3);
  EXPECT_TRUE(points.empty());
}

TEST(Scan, DeterministicForSameSeed) {
  const Scenario sc = make_scenario("smooth_room", 42);
  Scenario fast = sc;
  fast.lidar.points_per_second = 5000.0;
  const auto a = scan(fast.world, fast.trajectory, fast.lidar, 0.0, 2.0, 11);
  const auto b = scan(fast.world, fast.trajectory, fast.lidar, 0.0, 2.0, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].t, b[i].t);
    EXPECT_EQ((a[i].p - b[i].p).norm(), 0.0);
  }
  const auto c = scan(fast.world, fast.trajectory, fast.lidar, 0.0, 2.0, 12);
  bool any_differs = c.size() != a.size();
  for (std::size_t i = 0; !any_differs && i < std::min(a.size(), c.size()); ++i) {
    any_differs = (a[i].p - c[i].p).norm() > 0.0;
  }
  EXPECT_TRUE(any_differs);
}

TEST(Scan, HitsSatisfyPatchPlaneBeforeNoise) {
  Scenario sc = make_scenario("corridor_sharp_turns", 1);
  sc.lidar.points_per_second = 3000.0;
  sc.lidar.range_noise_std = 0.0;
  const auto points = scan(sc.world, sc.trajectory, sc.lidar, 0.0, 5.0, 1);
  ASSERT_GT(points.size(), 1000u);
  for (std::size_t i = 0; i < points.size(); i += 17) {
    const GroundTruth gt = sc.trajectory.ground_truth(points[i].t);
    const Eigen::Vector3d world_pt = gt.pose * (sc.lidar.extrinsic * points[i].p);
    double min_plane_dist = 1e9;
    for (const auto& patch : sc.world.patches()) {
      min_plane_dist =
          std::min(min_plane_dist, std::abs(patch.normal.dot(world_pt - patch.corner)));
    }
    EXPECT_LT(min_plane_dist, 1e-9);
  }
}

TEST(ImuStream, StationaryZeroNoiseReadsGravity) {
  TrajectoryBuilder b(Eigen::Vector3d::Zero(), 0.5);
  b.hold(2.0);
  const TrajectorySpec traj = b.build();
  const NoiseParams zero{0, 0, 0, 0};
  const auto samples =
      imu_stream(traj, 200.0, zero, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 5);
  ASSERT_GT(samples.size(), 100u);
  for (const auto& s : samples) {
    EXPECT_EQ(s.gyro.norm(), 0.0);
    EXPECT_LT((s.accel - Eigen::Vector3d(0, 0, kGravityMagnitude)).norm(), 1e-12);
  }
}

TEST(ImuStream, NoiseVarianceMatchesDiscreteSigma) {
  TrajectoryBuilder b(Eigen::Vector3d::Zero(), 0.0);
  b.hold(500.0);
  const TrajectorySpec traj = b.build();
  NoiseParams noise{0, 0, 0, 0};
  noise.sigma_gyro = 0.002;
  const double rate = 200.0;
  const auto samples =
      imu_stream(traj, rate, noise, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 99);
  ASSERT_GE(samples.size(), 100000u);

  const double expected_var = noise.sigma_gyro * noise.sigma_gyro * rate;
  for (int axis = 0; axis < 3; ++axis) {
    double sum = 0.0, sq = 0.0;
    for (const auto& s : samples) {
      sum += s.gyro[axis];
      sq += s.gyro[axis] * s.gyro[axis];
    }
    const double n = static_cast<double>(samples.size());
    const double var = sq / n - (sum / n) * (sum / n);
    EXPECT_NEAR(var, expected_var, 0.1 * expected_var);
  }
}

TEST(ImuStream, DeterministicAndConsistentWithGroundTruth) {
  const Scenario sc = make_scenario("smooth_room", 3);
  const NoiseParams zero{0, 0, 0, 0};
  const auto a = imu_stream(sc.trajectory, 200.0, zero, sc.gyro_bias, sc.accel_bias, 17);
  const auto b = imu_stream(sc.trajectory, 200.0, zero, sc.gyro_bias, sc.accel_bias, 17);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); i += 37) {
    EXPECT_EQ((a[i].gyro - b[i].gyro).norm(), 0.0);
    const GroundTruth gt = sc.trajectory.ground_truth(a[i].t);
    EXPECT_LT((a[i].gyro - sc.gyro_bias - gt.angular_velocity).norm(), 1e-12);
    EXPECT_LT((a[i].accel - sc.accel_bias - gt.accel).norm(), 1e-12);
  }
}

TEST(Scenario, UnknownNameThrows) {
  EXPECT_THROW(make_scenario("nope", 0), std::invalid_argument);
}

TEST(Scenario, ClosedLoopReturnsToStartExactly) {
  const Scenario sc = make_scenario("closed_loop_rect", 0);
  const GroundTruth start = sc.trajectory.ground_truth(0.0);
  const GroundTruth end = sc.trajectory.ground_truth(sc.trajectory.duration);
  EXPECT_LT((end.pose.translation - start.pose.translation).norm(), 1e-12);
  EXPECT_LT(end.pose.rotation.angle_to(start.pose.rotation), 1e-12);
}

TEST(Scenario, CorridorSodDipsDuringTurns) {
  const Scenario sc = make_scenario("corridor_sharp_turns", 0);
  ASSERT_EQ(sc.events.size(), 4u);
  const auto series = gt_sod_series(sc, 0.2, 0.1, 20000.0);
  ASSERT_GT(series.size(), 100u);

  auto in_any_turn = [&](double t) {
    for (const auto& e : sc.events)
      if (t >= e.t0 && t <= e.t1) return true;
    return false;
  };
  double straight_sum = 0.0;
  int straight_n = 0;
  for (const auto& [t, o] : series) {
    if (!in_any_turn(t)) {
      straight_sum += o;
      ++straight_n;
    }
  }
  ASSERT_GT(straight_n, 0);
  const double straight_mean = straight_sum / straight_n;
  EXPECT_GT(straight_mean, 0.8);

  for (const auto& e : sc.events) {
    double turn_min = 1.0;
    for (const auto& [t, o] : series) {
      if (t >= e.t0 && t <= e.t1) turn_min = std::min(turn_min, o);
    }
    EXPECT_LT(turn_min, straight_mean - 0.15)
        << "turn [" << e.t0 << ", " << e.t1 << "] mean " << straight_mean;
  }
}

TEST(Scenario, SmoothRoomSodStaysHigh) {
  const Scenario sc = make_scenario("smooth_room", 0);
  const auto series = gt_sod_series(sc, 0.2, 0.1, 20000.0);
  ASSERT_GT(series.size(), 50u);
  for (const auto& [t, o] : series) {
    EXPECT_GT(o, 0.9) << "t=" << t;
  }
}

TEST(World, IndoorAreaBuildsClosedCorridor) {
  World world;
  const std::vector<FreeRect> plan = {{0.0, 10.0, 0.0, 2.0}};
  add_indoor_area(world, plan, 0.0, 2.5);
  // From inside, rays in the plane and vertically must all hit something.
  const Eigen::Vector3d origin(5.0, 1.0, 1.2);
  for (double az = 0.0; az < 2 * M_PI; az += 0.1) {
    const Eigen::Vector3d dir(std::cos(az), std::sin(az), 0.0);
    EXPECT_TRUE(world.raycast(origin, dir, 0.1, 100.0).has_value()) << "az " << az;
  }
  EXPECT_TRUE(world.raycast(origin, Eigen::Vector3d(0, 0, 1), 0.1, 100.0).has_value());
  EXPECT_TRUE(world.raycast(origin, Eigen::Vector3d(0, 0, -1), 0.1, 100.0).has_value());
}
