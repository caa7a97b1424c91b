#pragma once

// Independent reference implementations used only by the tests. They favour
// obviousness over speed and share no code with the library beyond types.

#include "scandp/camera.hpp"
#include "scandp/geometry.hpp"
#include "scandp/mesh.hpp"
#include "scandp/occupancy_grid.hpp"
#include "scandp/point_cloud.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

using scandp::Vec3;

// Ray/plane intersection followed by a same-side barycentric test.
inline std::optional<double> ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-15 * n.norm()) return std::nullopt;
  const double t = n.dot(a - o) / denom;
  if (t <= 0.0) return std::nullopt;
  const Vec3 p = o + t * d;
  const double e0 = n.dot((b - a).cross(p - a));
  const double e1 = n.dot((c - b).cross(p - b));
  const double e2 = n.dot((a - c).cross(p - c));
  const double tol = -1e-12 * n.squaredNorm();
  if (e0 < tol || e1 < tol || e2 < tol) return std::nullopt;
  return t;
}

inline std::optional<double> ray_mesh(const scandp::TriangleMesh& mesh, const Vec3& o, const Vec3& d, double max_range) {
  std::optional<double> best;
  const auto& v = mesh.vertices();
  for (const auto& t : mesh.triangles()) {
    const auto hit = ray_triangle(o, d, v[t[0]], v[t[1]], v[t[2]]);
    if (hit && *hit <= max_range && (!best || *hit < *best)) best = hit;
  }
  return best;
}

// Pinhole ray through the center of pixel (u, v), camera frame.
inline Vec3 pixel_ray(const scandp::CameraModel& cam, int u, int v) {
  const double fx = 0.5 * cam.width / std::tan(0.5 * cam.fov_x * M_PI / 180.0);
  const double fy = 0.5 * cam.height / std::tan(0.5 * cam.fov_y * M_PI / 180.0);
  return Vec3((u + 0.5 - 0.5 * cam.width) / fx, (v + 0.5 - 0.5 * cam.height) / fy, 1.0).normalized();
}

// Closest point on triangle (region-based, Ericson).
inline Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_mesh_distance(const scandp::TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  const auto& v = mesh.vertices();
  for (const auto& t : mesh.triangles()) best = std::min(best, (p - closest_on_triangle(p, v[t[0]], v[t[1]], v[t[2]])).norm());
  return best;
}

// Every cell touched by densely sampling the segment.
inline std::set<scandp::CellIndex> sampled_cells(const scandp::OccupancyGrid& grid, const Vec3& a, const Vec3& b,
                                                 int samples) {
  std::set<scandp::CellIndex> cells;
  for (int s = 0; s <= samples; ++s) cells.insert(grid.world_to_cell(a + (b - a) * (double(s) / samples)));
  return cells;
}

// Distance from a point to a segment, computed by golden-section-free
// projection on the infinite line then clamped by comparing endpoints.
inline double point_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = (p - a).dot(d) / len2;
  if (s <= 0.0) return (p - a).norm();
  if (s >= 1.0) return (p - b).norm();
  return (p - (a + s * d)).norm();
}

// Lexicographically smallest minimum-size index subset (always containing the
// first and last index) whose skipped poses lie within eta of their spanning
// segment; exhaustive over all subsets.
inline std::vector<std::size_t> min_viewpoints(const std::vector<Vec3>& pts, double eta) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> best(n);
  std::iota(best.begin(), best.end(), 0);
  if (n <= 2) return best;
  const std::size_t inner = n - 2;
  for (std::uint32_t mask = 0; mask < (1u << inner); ++mask) {
    const std::size_t count = 2 + static_cast<std::size_t>(__builtin_popcount(mask));
    if (count > best.size()) continue;
    std::vector<std::size_t> keep = {0};
    for (std::size_t i = 0; i < inner; ++i) {
      if (mask & (1u << i)) keep.push_back(i + 1);
    }
    keep.push_back(n - 1);
    bool ok = true;
    for (std::size_t s = 0; s + 1 < keep.size() && ok; ++s) {
      for (std::size_t m = keep[s] + 1; m < keep[s + 1] && ok; ++m) ok = point_segment(pts[m], pts[keep[s]], pts[keep[s + 1]]) <= eta;
    }
    if (ok && (count < best.size() || keep < best)) best = keep;
  }
  return best;
}

// Optimal open tour from `start` by enumerating all permutations.
inline double optimal_open_tour(const Vec3& start, const std::vector<Vec3>& pts) {
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = (pts[perm[0]] - start).norm();
    for (std::size_t i = 1; i < perm.size() && len < best; ++i) len += (pts[perm[i]] - pts[perm[i - 1]]).norm();
    best = std::min(best, len);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Quadratic coverage scan.
inline double coverage(const scandp::PointCloud& scan, const scandp::PointCloud& gt, double eps) {
  std::size_t hit = 0;
  for (const Vec3& g : gt.points) {
    for (const Vec3& p : scan.points) {
      if ((g - p).norm() <= eps) {
        ++hit;
        break;
      }
    }
  }
  return double(hit) / double(gt.size());
}

}  // namespace oracle
