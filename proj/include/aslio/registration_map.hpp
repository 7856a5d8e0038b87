// Point-storing voxel map for registration: k-nearest-neighbor queries and
// local plane fitting for the point-to-plane measurement model.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "aslio/types.hpp"
#include "aslio/voxel.hpp"

namespace aslio {

/// Least-squares plane through a cluster: unit normal, centroid anchor and
/// rms point distance. Invalid when the cluster is rank-deficient or any
/// point lies beyond the inlier threshold. minor_spread is the standard
/// deviation along the smaller in-plane axis; a near-collinear cluster has
/// minor_spread at the noise level and its normal carries no information.
struct PlaneFit {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
  bool valid = false;
  double rms = 0.0;
  double minor_spread = 0.0;
};

/// Fits a plane by eigen-decomposition of the centered covariance; the normal
/// is the smallest-eigenvalue direction. Collinear clusters are rejected.
inline PlaneFit fit_plane(std::span<const Eigen::Vector3d> cluster, double inlier_threshold) {
  PlaneFit fit;
  if (cluster.size() < 3) return fit;

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cluster) centroid += p;
  centroid /= static_cast<double>(cluster.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : cluster) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(cluster.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d evals = es.eigenvalues();  // ascending
  // Collinear (or coincident) points: the two smallest spreads vanish.
  if (evals(1) <= 1e-12 * std::max(evals(2), 1e-12)) return fit;

  fit.normal = es.eigenvectors().col(0);
  // Deterministic sign: largest-magnitude component positive.
  int max_c = 0;
  fit.normal.cwiseAbs().maxCoeff(&max_c);
  if (fit.normal[max_c] < 0.0) fit.normal = -fit.normal;
  fit.anchor = centroid;
  fit.minor_spread = std::sqrt(std::max(0.0, evals(1)));

  double sq_sum = 0.0;
  bool all_inliers = true;
  for (const auto& p : cluster) {
    const double dist = fit.normal.dot(p - centroid);
    sq_sum += dist * dist;
    if (std::abs(dist) > inlier_threshold) all_inliers = false;
  }
  fit.rms = std::sqrt(sq_sum / static_cast<double>(cluster.size()));
  fit.valid = all_inliers;
  return fit;
}

class RegistrationMap {
 public:
  RegistrationMap(double voxel_size, int max_points_per_voxel)
      : voxel_size_(voxel_size), max_points_per_voxel_(max_points_per_voxel) {
    if (!(voxel_size_ > 0.0)) throw std::invalid_argument("voxel_size must be > 0");
    if (max_points_per_voxel_ < 1) throw std::invalid_argument("max_points_per_voxel must be >= 1");
  }

  double voxel_size() const { return voxel_size_; }
  bool empty() const { return total_points_ == 0; }
  std::size_t size() const { return total_points_; }
  std::size_t bucket_count() const { return buckets_.size(); }

  /// Appends world-frame points; buckets at capacity keep their existing
  /// points (first-in retention).
  void merge(std::span<const Eigen::Vector3d> world_points) {
    for (const auto& p : world_points) {
      auto& bucket = buckets_[voxel_key(p, voxel_size_)];
      if (static_cast<int>(bucket.size()) >= max_points_per_voxel_) continue;
      bucket.push_back(p);
      ++total_points_;
    }
  }

  /// Up to k points within `radius` of `query`, ascending by distance.
  /// Scans the minimal voxel shell covering the radius, in a fixed
  /// lexicographic order so results are deterministic.
  std::vector<Eigen::Vector3d> knn(const Eigen::Vector3d& query, int k, double radius) const {
    std::vector<Eigen::Vector3d> result;
    if (k < 1 || buckets_.empty()) return result;

    const double r2 = radius * radius;
    const VoxelKey lo = voxel_key(query - Eigen::Vector3d::Constant(radius), voxel_size_);
    const VoxelKey hi = voxel_key(query + Eigen::Vector3d::Constant(radius), voxel_size_);

    std::vector<std::pair<double, const Eigen::Vector3d*>> candidates;
    for (std::int64_t x = lo.x; x <= hi.x; ++x) {
      for (std::int64_t y = lo.y; y <= hi.y; ++y) {
        for (std::int64_t z = lo.z; z <= hi.z; ++z) {
          const auto it = buckets_.find(VoxelKey{x, y, z});
          if (it == buckets_.end()) continue;
          for (const auto& p : it->second) {
            const double d2 = (p - query).squaredNorm();
            if (d2 <= r2) candidates.emplace_back(d2, &p);
          }
        }
      }
    }

    const std::size_t take = std::min<std::size_t>(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
    result.reserve(take);
    for (std::size_t i = 0; i < take; ++i) result.push_back(*candidates[i].second);
    return result;
  }

  /// Plain-text export, one "x y z" triple per line, sorted by voxel key.
  void export_xyz(std::ostream& os) const {
    std::vector<const std::pair<const VoxelKey, std::vector<Eigen::Vector3d>>*> entries;
    entries.reserve(buckets_.size());
    for (const auto& entry : buckets_) entries.push_back(&entry);
    std::sort(entries.begin(), entries.end(),
              [](const auto* a, const auto* b) { return a->first < b->first; });
    char line[96];
    for (const auto* entry : entries) {
      for (const auto& p : entry->second) {
        std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
        os << line;
      }
    }
  }

  /// Visits every stored point (iteration order unspecified).
  template <typename Fn>
  void for_each_point(Fn&& fn) const {
    for (const auto& [key, bucket] : buckets_) {
      for (const auto& p : bucket) fn(key, p);
    }
  }

 private:
  double voxel_size_;
  int max_points_per_voxel_;
  std::size_t total_points_ = 0;
  std::unordered_map<VoxelKey, std::vector<Eigen::Vector3d>, VoxelKeyHash> buckets_;
};

/// Deterministic voxel-grid downsample: keeps the first point seen in each
/// leaf, preserving input order among survivors.
inline std::vector<Eigen::Vector3d> voxel_downsample(std::span<const Eigen::Vector3d> points,
                                                     double leaf_size) {
  std::vector<Eigen::Vector3d> kept;
  std::unordered_map<VoxelKey, char, VoxelKeyHash> seen;
  seen.reserve(points.size());
  for (const auto& p : points) {
    if (seen.try_emplace(voxel_key(p, leaf_size), 1).second) kept.push_back(p);
  }
  return kept;
}

}  // namespace aslio
