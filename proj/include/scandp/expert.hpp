#pragma once

#include "scandp/camera.hpp"
#include "scandp/geometry.hpp"
#include "scandp/mesh.hpp"
#include "scandp/occupancy_grid.hpp"
#include "scandp/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace scandp {

/// Cubic working volume shared by the map, the policy and the baselines.
struct GridSpec {
  Vec3 center = Vec3::Zero();
  double extent = 0.8;
  double cell_size = 0.02;

  OccupancyGrid make_grid() const { return OccupancyGrid(center - Vec3::Constant(0.5 * extent), extent, cell_size); }
  Workspace workspace() const { return Workspace{center, extent}; }
  bool contains(const Vec3& p) const { return ((p - center).cwiseAbs().array() <= 0.5 * extent).all(); }
};

/// Orbit radius used by the expert and the hemisphere baselines, as a
/// multiple of the mesh bounding radius (half the box diagonal).
inline constexpr double kOrbitRadiusFactor = 1.825;

/// Scripted scanning trajectory: an orbit around the object whose elevation
/// undulates between an upper and a lower band twice per revolution,
///   azimuth(t)   = phi0 + t * azimuth_step + jitter
///   elevation(t) = amplitude * sin(2 * (phi0 + t * azimuth_step)) + jitter
/// with the camera looking at the object center.
struct ExpertConfig {
  int steps = 500;
  double azimuth_step_deg = 1.8;
  double elevation_amplitude_deg = 35.0;
  double jitter_deg = 2.0;
  double radius_factor = kOrbitRadiusFactor;
  double max_step = 0.05;  // per-step translation bound (meters)
  std::optional<double> start_azimuth_deg;  // drawn from the seed when unset
};

/// Camera on the orbit sphere at (azimuth, elevation), looking at `center`.
Pose orbit_pose(const Vec3& center, double radius, double azimuth_rad, double elevation_rad);

struct Demonstration {
  std::vector<Pose> poses;
  std::vector<DepthMap> depths;
  std::string object_id;
  std::uint64_t seed = 0;
};

/// Poses only (no rendering).
std::vector<Pose> expert_trajectory(const TriangleMesh& mesh, std::uint64_t seed, const ExpertConfig& config = {});

Demonstration generate_expert_demo(const TriangleMesh& mesh, const CameraModel& cam, std::uint64_t seed,
                                   const ExpertConfig& config = {}, const std::string& object_id = "object");

/// Directory layout: poses.json plus depth_00000.bin ... per step.
void save_demo(const Demonstration& demo, const std::filesystem::path& dir);
Demonstration load_demo(const std::filesystem::path& dir);

/// Sliding windows over every demonstration: history poses t-h+1..t, grid
/// after integrating scans 0..t, target poses t+1..t+N. Normalisation is
/// fitted over all target poses.
Dataset build_dataset(const std::vector<Demonstration>& demos, const CameraModel& cam, const GridSpec& grid, int horizon,
                      int history);

}  // namespace scandp
