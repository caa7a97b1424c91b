#include "scandp/sampling.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace scandp {

PointCloud poisson_disk_sample(const TriangleMesh& mesh, double radius, const PoissonDiskOptions& options) {
  if (mesh.empty()) throw MeshError("poisson_disk_sample: empty mesh");
  if (!(radius > 0.0)) throw std::invalid_argument("poisson_disk_sample: radius must be positive");

  std::vector<double> areas(mesh.num_triangles());
  for (std::size_t t = 0; t < areas.size(); ++t) areas[t] = mesh.triangle_area(t);
  std::discrete_distribution<std::size_t> pick_triangle(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::mt19937_64 rng(options.seed);

  // Cells of edge `radius`: any conflicting sample lies in the 27-neighbourhood.
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
  const auto cell_of = [&](const Vec3& p) {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / radius)), static_cast<int>(std::floor(p.y() / radius)),
                           static_cast<int>(std::floor(p.z() / radius)));
  };

  PointCloud out;
  const double r2 = radius * radius;
  int failures = 0;
  while (failures < options.max_consecutive_failures) {
    const auto& tri = mesh.triangles()[pick_triangle(rng)];
    const double s = std::sqrt(unit(rng));
    const double t = unit(rng);
    const Vec3 p = (1.0 - s) * mesh.vertices()[tri[0]] + s * (1.0 - t) * mesh.vertices()[tri[1]] +
                   s * t * mesh.vertices()[tri[2]];
    const Eigen::Vector3i c = cell_of(p);
    bool rejected = false;
    for (int dx = -1; dx <= 1 && !rejected; ++dx) {
      for (int dy = -1; dy <= 1 && !rejected; ++dy) {
        for (int dz = -1; dz <= 1 && !rejected; ++dz) {
          const auto it = buckets.find(pack_key(c.x() + dx, c.y() + dy, c.z() + dz));
          if (it == buckets.end()) continue;
          for (const auto idx : it->second) {
            if ((out.points[idx] - p).squaredNorm() < r2) {
              rejected = true;
              break;
            }
          }
        }
      }
    }
    if (rejected) {
      ++failures;
      continue;
    }
    failures = 0;
    buckets[pack_key(c.x(), c.y(), c.z())].push_back(static_cast<std::uint32_t>(out.points.size()));
    out.points.push_back(p);
  }
  return out;
}

}  // namespace scandp
