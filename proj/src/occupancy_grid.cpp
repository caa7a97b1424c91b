#include "scandp/occupancy_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace scandp {

namespace {

template <typename Visit>
void for_each_bresenham(const CellIndex& a, const CellIndex& b, Visit&& visit) {
  std::int64_t p[3] = {a.i, a.j, a.k};
  const std::int64_t q[3] = {b.i, b.j, b.k};
  std::int64_t d[3];
  std::int64_t s[3];
  for (int ax = 0; ax < 3; ++ax) {
    d[ax] = std::abs(q[ax] - p[ax]);
    s[ax] = q[ax] > p[ax] ? 1 : -1;
  }
  int drive = 0;
  if (d[1] > d[drive]) drive = 1;
  if (d[2] > d[drive]) drive = 2;
  const int o1 = (drive + 1) % 3;
  const int o2 = (drive + 2) % 3;

  visit(CellIndex{static_cast<std::int32_t>(p[0]), static_cast<std::int32_t>(p[1]), static_cast<std::int32_t>(p[2])});
  std::int64_t e1 = 2 * d[o1] - d[drive];
  std::int64_t e2 = 2 * d[o2] - d[drive];
  for (std::int64_t step = 0; step < d[drive]; ++step) {
    p[drive] += s[drive];
    if (e1 >= 0) {
      p[o1] += s[o1];
      e1 -= 2 * d[drive];
    }
    if (e2 >= 0) {
      p[o2] += s[o2];
      e2 -= 2 * d[drive];
    }
    e1 += 2 * d[o1];
    e2 += 2 * d[o2];
    visit(CellIndex{static_cast<std::int32_t>(p[0]), static_cast<std::int32_t>(p[1]), static_cast<std::int32_t>(p[2])});
  }
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  const auto* b = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t>& in) {
  if (in.size() < sizeof(T)) throw GridError("OGM1: truncated stream");
  T value;
  std::memcpy(&value, in.data(), sizeof(T));
  in = in.subspan(sizeof(T));
  return value;
}

}  // namespace

std::vector<CellIndex> bresenham_cells(const CellIndex& a, const CellIndex& b) {
  std::vector<CellIndex> out;
  for_each_bresenham(a, b, [&](const CellIndex& c) { out.push_back(c); });
  return out;
}

std::vector<CellIndex> bresenham3d(const OccupancyGrid& grid, const Vec3& a, const Vec3& b) {
  return bresenham_cells(grid.world_to_cell(a), grid.world_to_cell(b));
}

OccupancyGrid::OccupancyGrid(const Vec3& origin, double extent, double cell_size)
    : origin_(origin), extent_(extent), cell_size_(cell_size) {
  if (!origin.allFinite()) throw GridError("grid origin must be finite");
  if (!(extent > 0.0) || !(cell_size > 0.0)) throw GridError("grid extent and cell size must be positive");
  const double ratio = extent / cell_size;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 1.0) {
    throw GridError("grid extent must be an integer multiple of the cell size");
  }
  if (rounded > 1024.0) throw GridError("grid too large");
  dim_ = static_cast<int>(rounded);
}

CellIndex OccupancyGrid::world_to_cell(const Vec3& p) const {
  const Vec3 r = (p - origin_) / cell_size_;
  return CellIndex{static_cast<std::int32_t>(std::floor(r.x())), static_cast<std::int32_t>(std::floor(r.y())),
                   static_cast<std::int32_t>(std::floor(r.z()))};
}

Vec3 OccupancyGrid::cell_center(const CellIndex& c) const {
  return origin_ + cell_size_ * Vec3(c.i + 0.5, c.j + 0.5, c.k + 0.5);
}

int OccupancyGrid::log_odds_quanta(const CellIndex& c) const {
  const auto it = cells_.find(c.key());
  return it == cells_.end() ? 0 : it->second.second;
}

double OccupancyGrid::log_odds(const CellIndex& c) const { return log_odds::to_value(log_odds_quanta(c)); }

void OccupancyGrid::apply(const CellIndex& c, int delta) {
  if (!in_bounds(c)) return;
  const auto it = cells_.try_emplace(c.key(), c, std::int16_t{0}).first;
  auto& entry = it->second;
  entry.second = static_cast<std::int16_t>(std::clamp(entry.second + delta, log_odds::kMin, log_odds::kMax));
  // Back at the prior: drop the entry so storage stays canonical.
  if (entry.second == 0) cells_.erase(it);
}

CellIndex OccupancyGrid::from_linear(std::size_t idx) const {
  const auto d = static_cast<std::size_t>(dim_);
  return CellIndex{static_cast<std::int32_t>(idx % d), static_cast<std::int32_t>((idx / d) % d),
                   static_cast<std::int32_t>(idx / (d * d))};
}

ScanUpdate OccupancyGrid::integrate_scan(const Vec3& camera_center, const PointCloud& cloud) {
  if (!camera_center.allFinite()) throw GridError("integrate_scan: camera center must be finite");
  const std::size_t total = static_cast<std::size_t>(dim_) * dim_ * dim_;
  if (scratch_flags_.size() != total) scratch_flags_.assign(total, 0);
  scratch_touched_.clear();

  const CellIndex origin_cell = world_to_cell(camera_center);
  for (const Vec3& p : cloud.points) {
    if (!p.allFinite()) continue;
    const CellIndex end = world_to_cell(p);
    for_each_bresenham(origin_cell, end, [&](const CellIndex& c) {
      if (c == origin_cell || !in_bounds(c)) return;
      const std::size_t li = linear(c);
      const std::uint8_t flag = c == end ? 2 : 1;
      if (scratch_flags_[li] == 0) scratch_touched_.push_back(static_cast<std::uint32_t>(li));
      scratch_flags_[li] = std::max(scratch_flags_[li], flag);
    });
    // A point in the camera's own cell is still a hit.
    if (end == origin_cell && in_bounds(end)) {
      const std::size_t li = linear(end);
      if (scratch_flags_[li] == 0) scratch_touched_.push_back(static_cast<std::uint32_t>(li));
      scratch_flags_[li] = 2;
    }
  }

  ScanUpdate update;
  for (const std::uint32_t li : scratch_touched_) {
    const bool hit = scratch_flags_[li] == 2;
    apply(from_linear(li), hit ? log_odds::kHit : log_odds::kMiss);
    (hit ? update.hits : update.misses) += 1;
    scratch_flags_[li] = 0;
  }
  scratch_touched_.clear();
  return update;
}

std::vector<CellIndex> OccupancyGrid::occupied_cells(double kappa) const {
  std::vector<CellIndex> out;
  for (const auto& [key, entry] : cells_) {
    if (log_odds::probability(log_odds::to_value(entry.second)) >= kappa) out.push_back(entry.first);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<CellIndex, int>> OccupancyGrid::sorted_cells() const {
  std::vector<std::pair<CellIndex, int>> out;
  out.reserve(cells_.size());
  for (const auto& [key, entry] : cells_) out.emplace_back(entry.first, entry.second);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

GridSnapshot OccupancyGrid::snapshot() const {
  GridSnapshot snap;
  snap.dim = dim_;
  snap.quanta.assign(static_cast<std::size_t>(dim_) * dim_ * dim_, 0);
  for (const auto& [key, entry] : cells_) snap.quanta[linear(entry.first)] = static_cast<std::int8_t>(entry.second);
  return snap;
}

void OccupancyGrid::restore(const GridSnapshot& snap) {
  if (snap.dim != dim_) throw GridError("snapshot dimension mismatch");
  cells_.clear();
  for (std::size_t li = 0; li < snap.quanta.size(); ++li) {
    if (snap.quanta[li] == 0) continue;
    const CellIndex c = from_linear(li);
    cells_.emplace(c.key(), std::make_pair(c, static_cast<std::int16_t>(snap.quanta[li])));
  }
}

std::vector<std::uint8_t> OccupancyGrid::serialize() const {
  std::vector<std::uint8_t> out;
  const auto cells = sorted_cells();
  out.reserve(52 + cells.size() * 16);
  out.insert(out.end(), {'O', 'G', 'M', '1'});
  put(out, origin_.x());
  put(out, origin_.y());
  put(out, origin_.z());
  put(out, extent_);
  put(out, cell_size_);
  put(out, static_cast<std::uint64_t>(cells.size()));
  for (const auto& [c, q] : cells) {
    put(out, c.i);
    put(out, c.j);
    put(out, c.k);
    put(out, static_cast<float>(log_odds::to_value(q)));
  }
  return out;
}

OccupancyGrid OccupancyGrid::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw GridError("OGM1: malformed header");
  if (!(bytes[0] == 'O' && bytes[1] == 'G' && bytes[2] == 'M')) throw GridError("OGM1: malformed header");
  if (bytes[3] != '1') throw GridError("OGM1: version mismatch");
  bytes = bytes.subspan(4);
  Vec3 origin;
  origin.x() = take<double>(bytes);
  origin.y() = take<double>(bytes);
  origin.z() = take<double>(bytes);
  const double extent = take<double>(bytes);
  const double cell = take<double>(bytes);
  const auto count = take<std::uint64_t>(bytes);
  OccupancyGrid grid(origin, extent, cell);
  if (bytes.size() != count * 16) throw GridError("OGM1: record section size mismatch");
  for (std::uint64_t n = 0; n < count; ++n) {
    CellIndex c;
    c.i = take<std::int32_t>(bytes);
    c.j = take<std::int32_t>(bytes);
    c.k = take<std::int32_t>(bytes);
    const float value = take<float>(bytes);
    const double q = std::round(value / log_odds::kQuantum);
    if (!grid.in_bounds(c)) throw GridError("OGM1: cell out of bounds");
    if (std::abs(value - q * log_odds::kQuantum) > 1e-4 || q < log_odds::kMin || q > log_odds::kMax) {
      throw GridError("OGM1: log-odds value off the update lattice");
    }
    if (q != 0) grid.cells_.emplace(c.key(), std::make_pair(c, static_cast<std::int16_t>(q)));
  }
  return grid;
}

void OccupancyGrid::save(const std::string& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GridError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

OccupancyGrid OccupancyGrid::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GridError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace scandp
