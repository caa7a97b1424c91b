#include "scandp/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace scandp {

double coverage(const PointCloud& scan, const PointCloud& gt, double epsilon) {
  if (gt.empty()) throw std::invalid_argument("coverage: ground truth is empty");
  if (!(epsilon > 0.0)) throw std::invalid_argument("coverage: epsilon must be positive");
  auto cell_of = [&](const Vec3& p) {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / epsilon)), static_cast<int>(std::floor(p.y() / epsilon)),
                           static_cast<int>(std::floor(p.z() / epsilon)));
  };
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
  buckets.reserve(gt.size());
  for (std::size_t n = 0; n < gt.size(); ++n) {
    const auto c = cell_of(gt.points[n]);
    buckets[pack_key(c.x(), c.y(), c.z())].push_back(static_cast<std::uint32_t>(n));
  }
  std::vector<char> covered(gt.size(), 0);
  std::size_t count = 0;
  const double eps2 = epsilon * epsilon;
  for (const Vec3& p : scan.points) {
    const auto c = cell_of(p);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = buckets.find(pack_key(c.x() + dx, c.y() + dy, c.z() + dz));
          if (it == buckets.end()) continue;
          for (std::uint32_t n : it->second) {
            if (!covered[n] && (gt.points[n] - p).squaredNorm() <= eps2) {
              covered[n] = 1;
              ++count;
            }
          }
        }
      }
    }
  }
  return static_cast<double>(count) / static_cast<double>(gt.size());
}

}  // namespace scandp
