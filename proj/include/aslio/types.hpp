#pragma once

#include <Eigen/Core>
#include <vector>

namespace aslio {

/// One LiDAR return: timestamp plus 3D point (frame depends on context).
struct TimedPoint {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
};

using PointCloud = std::vector<Eigen::Vector3d>;

}  // namespace aslio
