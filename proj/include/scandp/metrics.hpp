#pragma once

#include "scandp/point_cloud.hpp"

namespace scandp {

/// Fraction of ground-truth points with a scanned point within `epsilon`
/// (inclusive). Exact: uses a hash grid of edge `epsilon` over the ground truth.
double coverage(const PointCloud& scan, const PointCloud& gt, double epsilon);

}  // namespace scandp
