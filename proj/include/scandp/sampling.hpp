#pragma once

#include "scandp/mesh.hpp"
#include "scandp/point_cloud.hpp"

#include <cstdint>

namespace scandp {

struct PoissonDiskOptions {
  /// Sampling stops after this many consecutive rejected darts.
  int max_consecutive_failures = 2000;
  std::uint64_t seed = 0;
};

/// Dart throwing on the surface: area-weighted uniform candidates, rejected
/// when closer than `radius` to an accepted sample.
PointCloud poisson_disk_sample(const TriangleMesh& mesh, double radius, const PoissonDiskOptions& options = {});

}  // namespace scandp
