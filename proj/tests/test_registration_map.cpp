#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "aslio/registration_map.hpp"
#include "test_support.hpp"

using namespace aslio;
namespace at = aslio::testing;

TEST(RegistrationMap, MergeBelowCapacityStoresEverything) {
  RegistrationMap map(0.5, 20);
  std::mt19937_64 rng(1);
  PointCloud pts;
  for (int i = 0; i < 200; ++i) pts.push_back(at::random_vec(rng, 5.0));
  map.merge(pts);
  EXPECT_EQ(map.size(), 200u);
}

TEST(RegistrationMap, CapacityOneKeepsFirstInsertion) {
  RegistrationMap map(0.5, 1);
  std::mt19937_64 rng(2);
  PointCloud pts;
  for (int i = 0; i < 100; ++i) pts.push_back(at::random_vec(rng, 3.0));
  map.merge(pts);
  const std::size_t once = map.size();
  EXPECT_EQ(once, map.bucket_count());
  map.merge(pts);
  EXPECT_EQ(map.size(), once);
}

TEST(RegistrationMap, BucketCountEqualsDistinctKeys) {
  RegistrationMap map(0.5, 20);
  std::mt19937_64 rng(3);
  PointCloud pts;
  for (int i = 0; i < 300; ++i) pts.push_back(at::random_vec(rng, 4.0));
  map.merge(pts);
  std::unordered_set<VoxelKey, VoxelKeyHash> keys;
  for (const auto& p : pts) keys.insert(voxel_key(p, 0.5));
  EXPECT_EQ(map.bucket_count(), keys.size());
}

TEST(RegistrationMap, CapacityInvariantAfterMergeSequences) {
  RegistrationMap map(0.4, 5);
  std::mt19937_64 rng(4);
  for (int round = 0; round < 10; ++round) {
    PointCloud pts;
    for (int i = 0; i < 400; ++i) pts.push_back(at::random_vec(rng, 2.0));
    map.merge(pts);
  }
  std::unordered_map<VoxelKey, int, VoxelKeyHash> per_bucket;
  map.for_each_point([&](const VoxelKey& k, const Eigen::Vector3d& p) {
    ++per_bucket[k];
    EXPECT_EQ(voxel_key(p, 0.4), k) << "stored point must quantize to its bucket";
  });
  for (const auto& [key, count] : per_bucket) EXPECT_LE(count, 5);
}

TEST(Knn, QueryAtStoredPoint) {
  RegistrationMap map(0.5, 20);
  const PointCloud pts = {{1.0, 2.0, 3.0}, {5.0, 5.0, 5.0}};
  map.merge(pts);
  const auto result = map.knn({1.0, 2.0, 3.0}, 1, 1.0);
  ASSERT_EQ(result.size(), 1u);
  EXPECT_EQ((result[0] - Eigen::Vector3d(1.0, 2.0, 3.0)).norm(), 0.0);
}

TEST(Knn, EmptyMapGivesEmptyResult) {
  RegistrationMap map(0.5, 20);
  EXPECT_TRUE(map.knn({0, 0, 0}, 5, 2.0).empty());
}

TEST(Knn, FewerThanKReturnsWhatExists) {
  RegistrationMap map(0.5, 20);
  const PointCloud pts = {{0.0, 0.0, 0.0}, {0.2, 0.0, 0.0}};
  map.merge(pts);
  EXPECT_EQ(map.knn({0.05, 0.0, 0.0}, 5, 1.0).size(), 2u);
}

TEST(Knn, MatchesLinearScanOracle) {
  std::mt19937_64 rng(5);
  RegistrationMap map(0.5, 50);
  PointCloud pts;
  for (int i = 0; i < 5000; ++i) pts.push_back(at::random_vec(rng, 8.0));
  map.merge(pts);

  std::uniform_int_distribution<int> k_dist(3, 12);
  std::uniform_real_distribution<double> r_dist(0.3, 2.5);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector3d query = at::random_vec(rng, 8.0);
    const int k = k_dist(rng);
    const double radius = r_dist(rng);
    const auto got = map.knn(query, k, radius);
    const auto expected = at::knn_linear_scan(pts, query, k, radius);
    ASSERT_EQ(got.size(), expected.size()) << "query " << q;
    for (std::size_t i = 0; i < got.size(); ++i) {
      // Same distances in the same order (ties may reorder equal-distance
      // points; compare distances exactly).
      EXPECT_EQ((got[i] - query).norm(), (expected[i] - query).norm());
    }
    // Ascending order.
    for (std::size_t i = 1; i < got.size(); ++i) {
      EXPECT_LE((got[i - 1] - query).squaredNorm(), (got[i] - query).squaredNorm());
    }
  }
}

TEST(FitPlane, ExactPlaneRecovered) {
  const PointCloud pts = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.3, 0.7, 0}};
  const PlaneFit fit = fit_plane(pts, 0.1);
  ASSERT_TRUE(fit.valid);
  EXPECT_NEAR(std::abs(fit.normal.z()), 1.0, 1e-12);
  EXPECT_NEAR(fit.rms, 0.0, 1e-12);
  EXPECT_NEAR(fit.normal.norm(), 1.0, 1e-12);
}

TEST(FitPlane, OutlierInvalidatesFit) {
  const double threshold = 0.1;
  PointCloud pts = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  pts.push_back({0.5, 0.5, 10.0 * threshold});
  const PlaneFit fit = fit_plane(pts, threshold);
  EXPECT_FALSE(fit.valid);
}

TEST(FitPlane, CollinearClusterInvalid) {
  const PointCloud pts = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_FALSE(fit_plane(pts, 0.1).valid);
  const PointCloud two = {{0, 0, 0}, {1, 0, 0}};
  EXPECT_FALSE(fit_plane(two, 0.1).valid);
}

TEST(FitPlane, NoisyPlaneNormalWithinTwoDegrees) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.1 / 5.0);  // sigma = threshold/5
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d n = at::random_unit(rng);
    Eigen::Vector3d u = n.cross(Eigen::Vector3d::UnitX());
    if (u.norm() < 1e-6) u = n.cross(Eigen::Vector3d::UnitY());
    u.normalize();
    const Eigen::Vector3d v = n.cross(u);
    const Eigen::Vector3d origin = at::random_vec(rng, 5.0);

    PointCloud pts;
    std::uniform_real_distribution<double> span(-1.0, 1.0);
    for (int i = 0; i < 30; ++i) {
      pts.push_back(origin + span(rng) * u + span(rng) * v + noise(rng) * n);
    }
    const PlaneFit fit = fit_plane(pts, 0.1);
    ASSERT_TRUE(fit.valid) << "trial " << trial;
    const double angle = std::acos(std::min(1.0, std::abs(fit.normal.dot(n))));
    EXPECT_LT(angle, 2.0 * M_PI / 180.0) << "trial " << trial;
  }
}

TEST(FitPlane, RigidInvariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    PointCloud pts;
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int i = 0; i < 20; ++i)
      pts.push_back({at::random_vec(rng, 1.0).x(), at::random_vec(rng, 1.0).y(), noise(rng)});
    const PlaneFit base = fit_plane(pts, 0.1);
    ASSERT_TRUE(base.valid);

    const Pose transform(at::random_rotation(rng), at::random_vec(rng, 10.0));
    PointCloud moved;
    for (const auto& p : pts) moved.push_back(transform * p);
    const PlaneFit rotated = fit_plane(moved, 0.1);
    ASSERT_TRUE(rotated.valid);
    EXPECT_NEAR(rotated.rms, base.rms, 1e-9);
    const Eigen::Vector3d expected_normal = transform.rotation * base.normal;
    EXPECT_NEAR(std::abs(expected_normal.dot(rotated.normal)), 1.0, 1e-9);
  }
}

TEST(RegistrationMap, ExportXyzRoundTrips) {
  RegistrationMap map(0.5, 20);
  const PointCloud pts = {{1.25, -2.5, 0.75}, {3.0, 4.0, 5.0}};
  map.merge(pts);
  std::ostringstream os;
  map.export_xyz(os);
  std::istringstream is(os.str());
  double x, y, z;
  int count = 0;
  while (is >> x >> y >> z) ++count;
  EXPECT_EQ(count, 2);
}
