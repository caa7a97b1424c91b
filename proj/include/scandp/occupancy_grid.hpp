#pragma once

#include "scandp/geometry.hpp"
#include "scandp/point_cloud.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace scandp {

struct CellIndex {
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t k = 0;

  auto operator<=>(const CellIndex&) const = default;
  std::uint64_t key() const { return pack_key(i, j, k); }
};

/// Log-odds constants. Values are integer multiples of `kLogOddsQuantum`, so
/// the grid stores exact fixed-point sums.
namespace log_odds {
inline constexpr double kQuantum = 0.05;
inline constexpr int kHit = 17;    // +0.85
inline constexpr int kMiss = -8;   // -0.40
inline constexpr int kMin = -40;   // -2.0
inline constexpr int kMax = 70;    // +3.5

inline double to_value(int quanta) { return quanta * kQuantum; }
inline double probability(double l) { return 1.0 / (1.0 + std::exp(-l)); }
}  // namespace log_odds

struct ScanUpdate {
  std::size_t hits = 0;    // distinct cells that received a hit
  std::size_t misses = 0;  // distinct cells that received a miss (and no hit)
};

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense copy of the grid's fixed-point log-odds (x fastest), used for
/// per-step dataset snapshots.
struct GridSnapshot {
  int dim = 0;
  std::vector<std::int8_t> quanta;

  std::int8_t at(int i, int j, int k) const {
    return quanta[(static_cast<std::size_t>(k) * dim + j) * dim + i];
  }
};

/// Sparse probabilistic occupancy grid over a cube [origin, origin + extent]^3.
/// Absent cells carry log-odds 0 (p = 0.5).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const Vec3& origin, double extent, double cell_size);

  const Vec3& origin() const { return origin_; }
  double extent() const { return extent_; }
  double cell_size() const { return cell_size_; }
  /// Cells per axis.
  int dim() const { return dim_; }
  std::size_t cell_count() const { return cells_.size(); }

  bool in_bounds(const CellIndex& c) const {
    return c.i >= 0 && c.j >= 0 && c.k >= 0 && c.i < dim_ && c.j < dim_ && c.k < dim_;
  }

  /// Floor binning, half-open cells. The result may be out of bounds.
  CellIndex world_to_cell(const Vec3& p) const;
  Vec3 cell_center(const CellIndex& c) const;

  double log_odds(const CellIndex& c) const;
  int log_odds_quanta(const CellIndex& c) const;
  double probability_of(const CellIndex& c) const { return log_odds::probability(log_odds(c)); }

  /// Adds `delta` quanta to an in-bounds cell with clamping; out-of-bounds cells are ignored.
  void apply(const CellIndex& c, int delta);

  /// Bayesian update from one scan; per-scan deduplication with hit over miss.
  ScanUpdate integrate_scan(const Vec3& camera_center, const PointCloud& cloud);

  /// Cells with probability >= kappa, lexicographically sorted.
  std::vector<CellIndex> occupied_cells(double kappa) const;

  /// All stored cells with their log-odds quanta, lexicographically sorted.
  std::vector<std::pair<CellIndex, int>> sorted_cells() const;

  GridSnapshot snapshot() const;
  void restore(const GridSnapshot& snap);

  std::vector<std::uint8_t> serialize() const;
  static OccupancyGrid deserialize(std::span<const std::uint8_t> bytes);

  void save(const std::string& path) const;
  static OccupancyGrid load(const std::string& path);

 private:
  std::size_t linear(const CellIndex& c) const {
    return (static_cast<std::size_t>(c.k) * dim_ + c.j) * dim_ + c.i;
  }
  CellIndex from_linear(std::size_t idx) const;

  Vec3 origin_ = Vec3::Zero();
  double extent_ = 0.0;
  double cell_size_ = 0.0;
  int dim_ = 0;
  std::unordered_map<std::uint64_t, std::pair<CellIndex, std::int16_t>> cells_;

  // Per-scan scratch; flags[linear] = 1 miss, 2 hit.
  std::vector<std::uint8_t> scratch_flags_;
  std::vector<std::uint32_t> scratch_touched_;
};

/// Integer 3D Bresenham: 26-connected, starts at `a`, ends at `b`,
/// length max(|delta|) + 1.
std::vector<CellIndex> bresenham_cells(const CellIndex& a, const CellIndex& b);

/// Bresenham traversal between the cells containing world points `a` and `b`.
std::vector<CellIndex> bresenham3d(const OccupancyGrid& grid, const Vec3& a, const Vec3& b);

}  // namespace scandp
