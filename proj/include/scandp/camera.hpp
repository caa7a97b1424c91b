#pragma once

#include "scandp/geometry.hpp"
#include "scandp/mesh.hpp"
#include "scandp/point_cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace scandp {

/// Pinhole depth sensor.
struct CameraModel {
  int width = 224;
  int height = 224;
  double fov_x = 45.0;  // degrees
  double fov_y = 45.0;  // degrees
  double max_range = 2.0;

  /// Throws std::invalid_argument if any field is out of range.
  void validate() const;

  /// Unit ray direction in the camera frame through continuous pixel
  /// coordinates (u, v); pixel (i, j) has its center at (i + 0.5, j + 0.5).
  Vec3 ray_direction(double u, double v) const;
};

/// Row-major range image; 0 marks an invalid sample.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  static constexpr float kInvalid = 0.0f;

  float& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  float at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  static bool is_valid(float d) { return d > 0.0f && std::isfinite(d); }
  std::size_t valid_count() const;
};

DepthMap render_depth(const TriangleMesh& mesh, const Pose& pose, const CameraModel& cam);

/// World-frame points for every valid pixel, in row-major pixel order.
PointCloud backproject(const DepthMap& depth, const Pose& pose, const CameraModel& cam);

/// Zero-mean Gaussian range noise per valid sample; results <= 0 become invalid.
DepthMap add_depth_noise(const DepthMap& depth, double std_dev, std::uint64_t seed);

/// Binary layout: u32 width, u32 height, then width*height little-endian f32.
void write_depth(const DepthMap& depth, const std::filesystem::path& path);
DepthMap read_depth(const std::filesystem::path& path);

}  // namespace scandp
