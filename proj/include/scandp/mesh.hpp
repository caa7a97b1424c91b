#pragma once

#include "scandp/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace scandp {

/// Edge length of the cube that a mesh loaded at scale 1.0 is fitted into.
inline constexpr double kObjectFitEdge = 0.25;

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  bool empty() const { return (max.array() < min.array()).any(); }
  Aabb inflated(double margin) const {
    return {min - Vec3::Constant(margin), max + Vec3::Constant(margin)};
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

struct RayHit {
  double distance;
  std::uint32_t triangle;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Median-split bounding volume hierarchy over triangles.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first index into `order`; inner: left child
    std::uint32_t count = 0;  // leaf: triangle count; inner: 0
    std::uint32_t right = 0;
  };

  Bvh() = default;
  Bvh(const std::vector<Vec3>& vertices, const std::vector<Eigen::Vector3i>& triangles);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& order() const { return order_; }

 private:
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroids,
                      const std::vector<Aabb>& boxes);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

class TriangleMesh {
 public:
  TriangleMesh() = default;

  /// Validates indices, drops zero-area triangles and builds the BVH.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Eigen::Vector3i> triangles);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Eigen::Vector3i>& triangles() const { return triangles_; }
  const Aabb& bounds() const { return bounds_; }
  std::size_t num_triangles() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }

  /// Half of the bounding-box diagonal.
  double bounding_radius() const { return 0.5 * bounds_.extent().norm(); }
  double triangle_area(std::size_t t) const;
  double surface_area() const;

  /// Nearest intersection with t in (0, max_distance].
  std::optional<RayHit> intersect(const Ray& ray, double max_distance) const;

  /// Uniform scale about the bounding-box center followed by a translation.
  TriangleMesh transformed(double scale, const Vec3& new_center) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Eigen::Vector3i> triangles_;
  Aabb bounds_;
  Bvh bvh_;
};

/// Möller-Trumbore; returns the ray parameter of a front- or back-face hit.
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c);

/// Parses ASCII OBJ or PLY (chosen by extension) without rescaling.
TriangleMesh read_mesh_file(const std::filesystem::path& path);

/// Loads a mesh, recentres its bounding box on the origin, fits it into a
/// 0.25 m cube and multiplies by `scale`.
TriangleMesh load_mesh(const std::filesystem::path& path, double scale = 1.0);

/// Same normalisation as `load_mesh` for an in-memory mesh.
TriangleMesh normalize_mesh(const TriangleMesh& mesh, double scale = 1.0);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

// Procedural shapes used by fixtures and the `mesh` CLI subcommand.
TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
TriangleMesh make_box(const Vec3& min, const Vec3& max);
/// Concave L-shaped prism: a unit L profile in xy extruded along z, scaled by `size`.
TriangleMesh make_l_shape(double size);
/// Axis-aligned square quad in the plane x = `x`, spanning [-half, half] in y and z.
TriangleMesh make_wall_x(double x, double half);
/// Icosphere with a smooth radial bump field; non-convex for larger amplitudes.
TriangleMesh make_blob(double radius, double amplitude, int subdivisions, unsigned seed);
TriangleMesh make_torus(double major, double minor, int segments, int sides);
/// Primitive by name: sphere, cube, lshape, blob, torus.
TriangleMesh make_primitive(const std::string& name);

}  // namespace scandp
