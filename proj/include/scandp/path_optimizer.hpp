#pragma once

#include "scandp/geometry.hpp"
#include "scandp/occupancy_grid.hpp"

#include <limits>
#include <vector>

namespace scandp {

struct PathOptimizerConfig {
  double kappa_occ = 0.9;
  double r_min = 0.1;  // meters
  double eta = 0.02;   // meters
};

struct BubbleReport {
  double radius = std::numeric_limits<double>::infinity();
  bool kept = true;
};

struct BubbleResult {
  PoseHorizon kept;
  std::vector<BubbleReport> reports;  // one per input pose
};

/// Keeps the poses whose distance to every occupied cell center is at least r_min.
BubbleResult bubble_filter(const PoseHorizon& horizon, const OccupancyGrid& grid, double kappa_occ, double r_min);

/// Same, against precomputed occupied cell centers.
BubbleResult bubble_filter(const PoseHorizon& horizon, const std::vector<Vec3>& occupied_centers, double r_min);

/// Arc-length parameterised polyline through the translations, with per-segment slerp.
Pose interpolate(const PoseHorizon& horizon, double s);

/// max over original translations of the distance to the approximating polyline.
double reconstruction_loss(const PoseHorizon& approx, const PoseHorizon& original);

struct OptimizedHorizon {
  std::vector<std::size_t> indices;  // into the horizon handed to extract_viewpoints
  PoseHorizon poses;
  double loss = 0.0;
  bool empty = false;  // set by optimize when no pose survives the bubble filter
};

/// Minimum-cardinality index chain from the first to the last pose such that
/// every skipped pose lies within eta of its spanning segment.
OptimizedHorizon extract_viewpoints(const PoseHorizon& horizon, double eta);

/// bubble_filter followed by extract_viewpoints.
OptimizedHorizon optimize(const PoseHorizon& horizon, const OccupancyGrid& grid, const PathOptimizerConfig& config = {});

}  // namespace scandp
