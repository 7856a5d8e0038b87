// Integer voxel keys shared by the occupancy and registration maps.
//
// Quantization is floor-based so negative coordinates land in the cell below
// zero, and cells are half-open: a point exactly on a boundary belongs to the
// upper cell.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>

namespace aslio {

struct VoxelKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  bool operator==(const VoxelKey&) const = default;

  bool operator<(const VoxelKey& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
};

/// Floor-quantized voxel index of a point. voxel_size must be > 0.
inline VoxelKey voxel_key(const Eigen::Vector3d& p, double voxel_size) {
  return VoxelKey{static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

/// Chebyshev (L-inf) distance between voxel indices.
inline std::int64_t chebyshev_distance(const VoxelKey& a, const VoxelKey& b) {
  const std::int64_t dx = std::abs(a.x - b.x);
  const std::int64_t dy = std::abs(a.y - b.y);
  const std::int64_t dz = std::abs(a.z - b.z);
  return std::max(dx, std::max(dy, dz));
}

/// Manhattan (L1) distance between voxel indices.
inline std::int64_t manhattan_distance(const VoxelKey& a, const VoxelKey& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
}

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    // Large-prime spatial hash (Teschner et al. style).
    const std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ull ^
                            static_cast<std::uint64_t>(k.y) * 19349669ull ^
                            static_cast<std::uint64_t>(k.z) * 83492791ull;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace aslio
