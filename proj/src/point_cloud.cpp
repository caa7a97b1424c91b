#include "scandp/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace scandp {

namespace {

std::uint64_t voxel_key(const Vec3& p, double voxel) {
  return pack_key(static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel)));
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  VoxelAccumulator acc(voxel);
  acc.add(cloud);
  return acc.centroids();
}

VoxelAccumulator::VoxelAccumulator(double voxel) : voxel_(voxel) {
  if (!(voxel > 0.0)) throw std::invalid_argument("voxel size must be positive");
}

void VoxelAccumulator::add(const PointCloud& cloud) {
  for (const Vec3& p : cloud.points) {
    Cell& cell = cells_[voxel_key(p, voxel_)];
    cell.sum += p;
    ++cell.count;
  }
}

PointCloud VoxelAccumulator::centroids() const {
  std::vector<std::pair<std::uint64_t, Vec3>> items;
  items.reserve(cells_.size());
  for (const auto& [key, cell] : cells_) items.emplace_back(key, cell.sum / double(cell.count));
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  PointCloud out;
  out.points.reserve(items.size());
  for (auto& item : items) out.points.push_back(item.second);
  return out;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out.precision(9);
  for (const Vec3& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

PointCloud read_ply_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  std::size_t nprops = 0;
  bool in_vertex = false;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw std::runtime_error("not a PLY file");
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (tag == "property" && in_vertex) {
      ++nprops;
    } else if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw std::runtime_error("only ASCII PLY is supported");
    } else if (tag == "end_header") {
      break;
    }
  }
  if (nprops < 3) throw std::runtime_error("PLY vertex element lacks x y z");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("PLY truncated");
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) throw std::runtime_error("malformed PLY vertex");
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace scandp
