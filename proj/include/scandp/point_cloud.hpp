#pragma once

#include "scandp/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

namespace scandp {

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void append(const PointCloud& other) { points.insert(points.end(), other.points.begin(), other.points.end()); }
};

/// Packs a signed integer triple (each in [-2^20, 2^20)) into one key.
inline std::uint64_t pack_key(std::int64_t i, std::int64_t j, std::int64_t k) {
  constexpr std::int64_t kBias = 1 << 20;
  constexpr std::uint64_t kMask = (1u << 21) - 1;
  return (static_cast<std::uint64_t>(i + kBias) & kMask) << 42 | (static_cast<std::uint64_t>(j + kBias) & kMask) << 21 |
         (static_cast<std::uint64_t>(k + kBias) & kMask);
}

/// One centroid per occupied voxel of edge `voxel`, sorted by voxel key.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

/// Running per-voxel centroid so long episodes never hold every raw point.
/// Centroids are order-independent, so the result equals `voxel_downsample`
/// of the concatenated input up to floating-point summation order.
class VoxelAccumulator {
 public:
  explicit VoxelAccumulator(double voxel);

  void add(const PointCloud& cloud);
  PointCloud centroids() const;
  std::size_t voxel_count() const { return cells_.size(); }
  double voxel_size() const { return voxel_; }

 private:
  struct Cell {
    Vec3 sum = Vec3::Zero();
    std::uint32_t count = 0;
  };
  double voxel_;
  std::unordered_map<std::uint64_t, Cell> cells_;
};

/// ASCII PLY with `x y z` vertex properties.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_ply_points(const std::filesystem::path& path);

}  // namespace scandp
