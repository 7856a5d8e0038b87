// Soft-margin voxel occupancy map and the frame-to-map Spatial Overlap
// Degree (SOD).
//
// Occupied voxels carry margin label 0. Every voxel within unit distance
// i <= margin_extent of an occupied voxel (and not closer) carries label i,
// where "unit distance" is Chebyshev (26-neighborhood shells) by default or
// Manhattan when selected. A frame's overlap score is the weight-averaged
// fraction of its points that land in labeled voxels:
//
//   score = sum_i beta_i * Num(points in label-i voxels) / Num(points)
//
// with beta_0 = 1 and beta strictly decreasing. Storage is a two-level
// structure (8x8x8 voxel blocks -> dense label array) behind a flat
// key -> label interface.

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aslio/geometry.hpp"
#include "aslio/types.hpp"
#include "aslio/voxel.hpp"

namespace aslio {

enum class MarginMetric { kChebyshev, kManhattan };

/// Weighted per-margin-level hit counts for one scored frame.
struct OverlapScore {
  double value = 0.0;                // in [0, 1]
  std::vector<std::int64_t> counts;  // hits per margin level 0..d
  std::int64_t total = 0;            // Num(f)
};

namespace detail {

inline double weighted_overlap(std::span<const double> beta,
                               std::span<const std::int64_t> counts,
                               std::int64_t total) {
  double weighted = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weighted += beta[i] * static_cast<double>(counts[i]);
  }
  return weighted / static_cast<double>(total);
}

inline void validate_beta(std::span<const double> beta, int margin_extent) {
  if (margin_extent < 0) throw std::invalid_argument("margin_extent must be >= 0");
  if (static_cast<int>(beta.size()) != margin_extent + 1)
    throw std::invalid_argument("beta must have margin_extent + 1 entries");
  if (beta[0] != 1.0) throw std::invalid_argument("beta[0] must be 1");
  for (std::size_t i = 1; i < beta.size(); ++i) {
    if (!(beta[i] < beta[i - 1])) throw std::invalid_argument("beta must be strictly decreasing");
  }
  if (!(beta.back() > 0.0)) throw std::invalid_argument("beta[d] must be > 0");
}

}  // namespace detail

/// Default weight descent: beta_i = 2^-i.
inline std::vector<double> default_beta(int margin_extent) {
  std::vector<double> beta(margin_extent + 1);
  double w = 1.0;
  for (int i = 0; i <= margin_extent; ++i, w *= 0.5) beta[i] = w;
  return beta;
}

class OccupancyVoxelMap {
 public:
  static constexpr std::uint8_t kUnlabeled = 0xFF;

  OccupancyVoxelMap(double voxel_size, int margin_extent, std::vector<double> beta,
                    MarginMetric metric = MarginMetric::kChebyshev)
      : voxel_size_(voxel_size),
        margin_extent_(margin_extent),
        beta_(std::move(beta)),
        metric_(metric) {
    if (!(voxel_size_ > 0.0)) throw std::invalid_argument("voxel_size must be > 0");
    detail::validate_beta(beta_, margin_extent_);
    build_offsets();
  }

  OccupancyVoxelMap(double voxel_size, int margin_extent)
      : OccupancyVoxelMap(voxel_size, margin_extent, default_beta(margin_extent)) {}

  double voxel_size() const { return voxel_size_; }
  int margin_extent() const { return margin_extent_; }
  const std::vector<double>& beta() const { return beta_; }
  MarginMetric metric() const { return metric_; }
  bool empty() const { return blocks_.empty(); }

  /// Labels the voxels hit by world-frame points with 0 and dilates the
  /// margin shells. Labels only ever decrease (min semantics), so
  /// re-inserting covered points is a no-op.
  void insert(std::span<const Eigen::Vector3d> world_points) {
    std::unordered_set<VoxelKey, VoxelKeyHash> seen;
    seen.reserve(world_points.size());
    for (const auto& p : world_points) {
      const VoxelKey key = voxel_key(p, voxel_size_);
      if (!seen.insert(key).second) continue;
      // A voxel already labeled 0 has had its full shell stamped before.
      if (label_at(key) == 0) continue;
      for (const auto& off : offsets_) {
        stamp_min(VoxelKey{key.x + off.dx, key.y + off.dy, key.z + off.dz}, off.label);
      }
    }
  }

  /// Margin label of the voxel containing a world point, or kUnlabeled.
  std::uint8_t label_of(const Eigen::Vector3d& world_point) const {
    return label_at(voxel_key(world_point, voxel_size_));
  }

  /// Frame-to-map SOD: transforms each sensor-frame point by `pose`, looks
  /// up its margin label and accumulates beta-weighted counts.
  OverlapScore overlap(std::span<const Eigen::Vector3d> sensor_points, const Pose& pose) const {
    if (sensor_points.empty())
      throw std::invalid_argument("overlap: frame must contain at least one point");
    OverlapScore score;
    score.counts.assign(margin_extent_ + 1, 0);
    score.total = static_cast<std::int64_t>(sensor_points.size());
    for (const auto& p : sensor_points) {
      const std::uint8_t label = label_of(pose * p);
      if (label != kUnlabeled) ++score.counts[label];
    }
    score.value = detail::weighted_overlap(beta_, score.counts, score.total);
    return score;
  }

  /// Removes blocks whose nearest voxel lies farther than `radius` from
  /// `center`. Off by default; intended for long runs.
  void crop(const Eigen::Vector3d& center, double radius) {
    const double block_span = 8.0 * voxel_size_;
    for (auto it = blocks_.begin(); it != blocks_.end();) {
      double dist2 = 0.0;
      const double bx[3] = {static_cast<double>(it->first.x) * block_span,
                            static_cast<double>(it->first.y) * block_span,
                            static_cast<double>(it->first.z) * block_span};
      for (int a = 0; a < 3; ++a) {
        const double lo = bx[a];
        const double hi = bx[a] + block_span;
        const double c = center[a];
        const double d = c < lo ? lo - c : (c > hi ? c - hi : 0.0);
        dist2 += d * d;
      }
      if (dist2 > radius * radius) {
        it = blocks_.erase(it);
      } else {
        ++it;
      }
    }
  }

  /// Labeled-cell count per margin level (diagnostics).
  std::vector<std::size_t> cells_per_label() const {
    std::vector<std::size_t> counts(margin_extent_ + 1, 0);
    for (const auto& [key, block] : blocks_) {
      for (const std::uint8_t label : block) {
        if (label != kUnlabeled) ++counts[label];
      }
    }
    return counts;
  }

  std::size_t block_count() const { return blocks_.size(); }

  std::size_t memory_bytes() const {
    return blocks_.size() * (sizeof(Block) + sizeof(VoxelKey) + 2 * sizeof(void*));
  }

  /// Visits every labeled cell (iteration order unspecified).
  template <typename Fn>
  void for_each_cell(Fn&& fn) const {
    for (const auto& [bkey, block] : blocks_) {
      for (int idx = 0; idx < 512; ++idx) {
        if (block[idx] == kUnlabeled) continue;
        const VoxelKey key{(bkey.x << 3) + (idx & 7), (bkey.y << 3) + ((idx >> 3) & 7),
                           (bkey.z << 3) + (idx >> 6)};
        fn(key, block[idx]);
      }
    }
  }

 private:
  using Block = std::array<std::uint8_t, 512>;

  struct Offset {
    std::int32_t dx, dy, dz;
    std::uint8_t label;
  };

  void build_offsets() {
    const int d = margin_extent_;
    for (int dz = -d; dz <= d; ++dz) {
      for (int dy = -d; dy <= d; ++dy) {
        for (int dx = -d; dx <= d; ++dx) {
          const int dist = metric_ == MarginMetric::kChebyshev
                               ? std::max({std::abs(dx), std::abs(dy), std::abs(dz)})
                               : std::abs(dx) + std::abs(dy) + std::abs(dz);
          if (dist > d) continue;
          offsets_.push_back({dx, dy, dz, static_cast<std::uint8_t>(dist)});
        }
      }
    }
  }

  static VoxelKey block_key(const VoxelKey& key) {
    return VoxelKey{key.x >> 3, key.y >> 3, key.z >> 3};
  }

  static int inner_index(const VoxelKey& key) {
    return static_cast<int>((key.x & 7) | ((key.y & 7) << 3) | ((key.z & 7) << 6));
  }

  std::uint8_t label_at(const VoxelKey& key) const {
    const auto it = blocks_.find(block_key(key));
    if (it == blocks_.end()) return kUnlabeled;
    return it->second[inner_index(key)];
  }

  void stamp_min(const VoxelKey& key, std::uint8_t label) {
    auto [it, inserted] = blocks_.try_emplace(block_key(key));
    if (inserted) it->second.fill(kUnlabeled);
    std::uint8_t& cell = it->second[inner_index(key)];
    if (label < cell) cell = label;
  }

  double voxel_size_;
  int margin_extent_;
  std::vector<double> beta_;
  MarginMetric metric_;
  std::vector<Offset> offsets_;
  std::unordered_map<VoxelKey, Block, VoxelKeyHash> blocks_;
};

/// O(N*M) reference SOD: the margin label of each frame point is the minimum
/// voxel-index distance to any map point's voxel, capped at d+1 (unlabeled).
/// Independent of OccupancyVoxelMap; used as the test oracle.
inline OverlapScore overlap_score_bruteforce(std::span<const Eigen::Vector3d> map_points,
                                             std::span<const Eigen::Vector3d> frame_points,
                                             const Pose& pose, double voxel_size,
                                             int margin_extent, std::span<const double> beta,
                                             MarginMetric metric = MarginMetric::kChebyshev) {
  if (frame_points.empty())
    throw std::invalid_argument("overlap_score_bruteforce: frame must contain at least one point");
  detail::validate_beta(beta, margin_extent);

  std::vector<VoxelKey> map_keys;
  map_keys.reserve(map_points.size());
  for (const auto& p : map_points) map_keys.push_back(voxel_key(p, voxel_size));

  OverlapScore score;
  score.counts.assign(margin_extent + 1, 0);
  score.total = static_cast<std::int64_t>(frame_points.size());
  for (const auto& p : frame_points) {
    const VoxelKey key = voxel_key(pose * p, voxel_size);
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (const auto& mk : map_keys) {
      const std::int64_t dist = metric == MarginMetric::kChebyshev
                                    ? chebyshev_distance(key, mk)
                                    : manhattan_distance(key, mk);
      if (dist < best) {
        best = dist;
        if (best == 0) break;
      }
    }
    if (best <= margin_extent) ++score.counts[best];
  }
  score.value = detail::weighted_overlap(beta, score.counts, score.total);
  return score;
}

}  // namespace aslio
