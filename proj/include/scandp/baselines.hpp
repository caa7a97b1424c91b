#pragma once

#include "scandp/geometry.hpp"
#include "scandp/mesh.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scandp {

struct ViewpointSet {
  std::vector<Pose> poses;
  std::string kind;
  std::uint64_t seed = 0;
  double radius = 0.0;  // hemisphere kinds only
};

/// Uniform translations in `bounds` outside `excluded` (rejection sampling),
/// each looking at `target`.
ViewpointSet random_poses(int count, const Aabb& bounds, const Aabb& excluded, const Vec3& target, std::uint64_t seed);

/// Golden-angle lattice on the upper hemisphere: point n of `count` sits at
/// height radius * (1 - (n + 0.5) / count). A single point is the pole.
ViewpointSet fibonacci_hemisphere(int count, const Vec3& center, double radius);

/// Area-uniform points on the upper hemisphere (height uniform in [0, radius]).
ViewpointSet random_hemisphere(int count, const Vec3& center, double radius, std::uint64_t seed);

/// Open tour from `start` through every viewpoint: nearest neighbour, then
/// first-improvement 2-opt (at most `max_passes` sweeps), refined by Or-opt
/// moves and nearest-neighbour restarts from each first stop. `start` itself
/// is not part of the returned horizon.
PoseHorizon tsp_order(const std::vector<Pose>& viewpoints, const Pose& start, int max_passes = 50);

/// Length of the open tour start -> order[0] -> order[1] -> ...
double tour_length(const Vec3& start, const std::vector<Vec3>& points, const std::vector<std::size_t>& order);

/// Same search on raw points; returns the visiting order. `max_passes` = 0
/// returns the plain nearest-neighbour order.
std::vector<std::size_t> tsp_order_points(const Vec3& start, const std::vector<Vec3>& points, int max_passes = 50);

}  // namespace scandp
