#include "scandp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace scandp {

namespace {

constexpr std::uint32_t kLeafSize = 4;
constexpr double kMinTriangleArea = 1e-14;

Aabb triangle_box(const Vec3& a, const Vec3& b, const Vec3& c) {
  Aabb box;
  box.extend(a);
  box.extend(b);
  box.extend(c);
  return box;
}

// Slab test; returns entry distance or nullopt.
std::optional<double> ray_box(const Ray& ray, const Vec3& inv_dir, const Aabb& box, double max_t) {
  double t0 = 0.0;
  double t1 = max_t;
  for (int axis = 0; axis < 3; ++axis) {
    double near = (box.min[axis] - ray.origin[axis]) * inv_dir[axis];
    double far = (box.max[axis] - ray.origin[axis]) * inv_dir[axis];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf keeps the current interval.
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

}  // namespace

Bvh::Bvh(const std::vector<Vec3>& vertices, const std::vector<Eigen::Vector3i>& triangles) {
  if (triangles.empty()) return;
  std::vector<Vec3> centroids(triangles.size());
  std::vector<Aabb> boxes(triangles.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    const Vec3& a = vertices[tri[0]];
    const Vec3& b = vertices[tri[1]];
    const Vec3& c = vertices[tri[2]];
    centroids[t] = (a + b + c) / 3.0;
    boxes[t] = triangle_box(a, b, c);
  }
  order_.resize(triangles.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * triangles.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(triangles.size()), centroids, boxes);
}

std::uint32_t Bvh::build(std::uint32_t begin, std::uint32_t end, const std::vector<Vec3>& centroids,
                         const std::vector<Aabb>& boxes) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(boxes[order_[i]]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;

  const std::uint32_t count = end - begin;
  const Vec3 spread = centroid_box.extent();
  int axis = 0;
  spread.maxCoeff(&axis);
  if (count <= kLeafSize || spread[axis] <= 0.0) {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  }

  const std::uint32_t mid = begin + count / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) { return centroids[l][axis] < centroids[r][axis]; });
  const std::uint32_t left = build(begin, mid, centroids, boxes);
  const std::uint32_t right = build(mid, end, centroids, boxes);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

std::optional<double> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = ray.origin - a;
  const double u = s.dot(p) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (t <= 0.0) return std::nullopt;
  return t;
}

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Eigen::Vector3i> triangles)
    : vertices_(std::move(vertices)) {
  const auto nv = static_cast<int>(vertices_.size());
  for (const Vec3& v : vertices_) {
    if (!v.allFinite()) throw MeshError("mesh has a non-finite vertex");
  }
  triangles_.reserve(triangles.size());
  for (const auto& tri : triangles) {
    if ((tri.array() < 0).any() || (tri.array() >= nv).any()) {
      throw MeshError("triangle index out of range");
    }
    const Vec3 n = (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
    if (0.5 * n.norm() > kMinTriangleArea) triangles_.push_back(tri);
  }
  for (const auto& tri : triangles_) {
    for (int k = 0; k < 3; ++k) bounds_.extend(vertices_[tri[k]]);
  }
  bvh_ = Bvh(vertices_, triangles_);
}

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles_[t];
  return 0.5 * (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]).norm();
}

double TriangleMesh::surface_area() const {
  double total = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) total += triangle_area(t);
  return total;
}

std::optional<RayHit> TriangleMesh::intersect(const Ray& ray, double max_distance) const {
  const auto& nodes = bvh_.nodes();
  if (nodes.empty()) return std::nullopt;
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  std::optional<RayHit> best;
  double best_t = max_distance;

  std::array<std::uint32_t, 64> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = nodes[stack[--top]];
    const auto entry = ray_box(ray, inv_dir, node.box, best_t);
    if (!entry) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t t = bvh_.order()[i];
        const auto& tri = triangles_[t];
        const auto hit = intersect_triangle(ray, vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
        if (hit && *hit <= best_t) {
          best_t = *hit;
          best = RayHit{*hit, t};
        }
      }
    } else {
      // Visit the nearer child first.
      const auto dl = ray_box(ray, inv_dir, nodes[node.first].box, best_t);
      const auto dr = ray_box(ray, inv_dir, nodes[node.right].box, best_t);
      if (dl && dr) {
        if (*dl < *dr) {
          stack[top++] = node.right;
          stack[top++] = node.first;
        } else {
          stack[top++] = node.first;
          stack[top++] = node.right;
        }
      } else if (dl) {
        stack[top++] = node.first;
      } else if (dr) {
        stack[top++] = node.right;
      }
    }
  }
  return best;
}

TriangleMesh TriangleMesh::transformed(double scale, const Vec3& new_center) const {
  const Vec3 c = bounds_.center();
  std::vector<Vec3> verts;
  verts.reserve(vertices_.size());
  for (const Vec3& v : vertices_) verts.push_back((v - c) * scale + new_center);
  return TriangleMesh(std::move(verts), triangles_);
}

namespace {

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw MeshError(path.string() + ":" + std::to_string(line) + ": " + what);
}

int resolve_obj_index(const std::string& token, int vertex_count, const std::filesystem::path& path,
                      std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) parse_error(path, line, "bad face index '" + token + "'");
  } catch (const std::logic_error&) {
    parse_error(path, line, "bad face index '" + token + "'");
  }
  if (idx > 0) return idx - 1;
  if (idx < 0) return vertex_count + idx;
  parse_error(path, line, "face index 0 is invalid");
}

TriangleMesh read_obj(const std::filesystem::path& path, std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> triangles;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::istringstream ls(text);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) parse_error(path, line_no, "malformed vertex");
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        poly.push_back(resolve_obj_index(tok, static_cast<int>(vertices.size()), path, line_no));
      }
      if (poly.size() < 3) parse_error(path, line_no, "face with fewer than 3 vertices");
      for (const int idx : poly) {
        if (idx < 0 || idx >= static_cast<int>(vertices.size())) {
          parse_error(path, line_no, "face index out of range");
        }
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) triangles.emplace_back(poly[0], poly[k], poly[k + 1]);
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

TriangleMesh read_ply(const std::filesystem::path& path, std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, text)) return false;
    ++line_no;
    return true;
  };
  if (!next_line() || text.rfind("ply", 0) != 0) parse_error(path, line_no, "missing 'ply' magic");

  std::size_t vertex_count = 0;
  std::size_t face_count = 0;
  std::vector<std::string> vertex_props;
  std::string current;
  bool ascii = false;
  std::vector<std::string> element_order;
  while (true) {
    if (!next_line()) parse_error(path, line_no, "unterminated header");
    std::istringstream ls(text);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
      if (!ascii) parse_error(path, line_no, "only ASCII PLY is supported");
    } else if (tag == "element") {
      std::size_t n = 0;
      ls >> current >> n;
      element_order.push_back(current);
      if (current == "vertex") vertex_count = n;
      if (current == "face") face_count = n;
    } else if (tag == "property") {
      std::string type;
      ls >> type;
      if (current == "vertex") {
        std::string name;
        ls >> name;
        vertex_props.push_back(name);
      }
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) parse_error(path, line_no, "missing format line");
  const auto find_prop = [&](const std::string& name) {
    const auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    if (it == vertex_props.end()) parse_error(path, line_no, "vertex property '" + name + "' missing");
    return static_cast<std::size_t>(it - vertex_props.begin());
  };
  const std::size_t ix = find_prop("x");
  const std::size_t iy = find_prop("y");
  const std::size_t iz = find_prop("z");

  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> triangles;
  for (const auto& element : element_order) {
    if (element == "vertex") {
      vertices.reserve(vertex_count);
      for (std::size_t i = 0; i < vertex_count; ++i) {
        if (!next_line()) parse_error(path, line_no, "unexpected end of vertex list");
        std::istringstream ls(text);
        std::vector<double> vals(vertex_props.size());
        for (auto& val : vals) {
          if (!(ls >> val)) parse_error(path, line_no, "malformed vertex");
        }
        vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
      }
    } else if (element == "face") {
      for (std::size_t i = 0; i < face_count; ++i) {
        if (!next_line()) parse_error(path, line_no, "unexpected end of face list");
        std::istringstream ls(text);
        std::size_t n = 0;
        if (!(ls >> n) || n < 3) parse_error(path, line_no, "malformed face");
        std::vector<int> poly(n);
        for (auto& idx : poly) {
          if (!(ls >> idx)) parse_error(path, line_no, "malformed face");
          if (idx < 0 || idx >= static_cast<int>(vertex_count)) parse_error(path, line_no, "face index out of range");
        }
        for (std::size_t k = 1; k + 1 < n; ++k) triangles.emplace_back(poly[0], poly[k], poly[k + 1]);
      }
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

}  // namespace

TriangleMesh read_mesh_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MeshError("file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open: " + path.string());
  const std::string ext = lowercase_extension(path);
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = read_obj(path, in);
  } else if (ext == ".ply") {
    mesh = read_ply(path, in);
  } else {
    throw MeshError("unsupported mesh format '" + ext + "' (expected .obj or .ply)");
  }
  if (mesh.empty()) throw MeshError("empty mesh: " + path.string());
  return mesh;
}

TriangleMesh normalize_mesh(const TriangleMesh& mesh, double scale) {
  if (!(scale > 0.0)) throw MeshError("scale must be positive");
  if (mesh.empty()) throw MeshError("empty mesh");
  const double edge = mesh.bounds().extent().maxCoeff();
  return mesh.transformed(kObjectFitEdge / edge * scale, Vec3::Zero());
}

TriangleMesh load_mesh(const std::filesystem::path& path, double scale) {
  if (!(scale > 0.0)) throw MeshError("scale must be positive");
  return normalize_mesh(read_mesh_file(path), scale);
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write: " + path.string());
  out.precision(17);
  for (const Vec3& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

TriangleMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                             {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                             {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int a = mid(t[0], t[1]);
      const int b = mid(t[1], t[2]);
      const int c = mid(t[2], t[0]);
      next.emplace_back(t[0], a, c);
      next.emplace_back(t[1], b, a);
      next.emplace_back(t[2], c, b);
      next.emplace_back(a, b, c);
    }
    tris = std::move(next);
  }
  for (auto& v : verts) v = v * radius + center;
  return TriangleMesh(std::move(verts), std::move(tris));
}

TriangleMesh make_box(const Vec3& min, const Vec3& max) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(), (i & 4) ? max.z() : min.z());
  }
  std::vector<Eigen::Vector3i> t = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                                    {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return TriangleMesh(std::move(v), std::move(t));
}

TriangleMesh make_l_shape(double size) {
  // Profile (counter-clockwise): an L made of a 2x1 bar and a 1x1 block on top.
  const std::vector<Eigen::Vector2d> profile = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  const double s = size / 2.0;
  std::vector<Vec3> v;
  for (const auto& p : profile) v.emplace_back(p.x() * s - size / 2, p.y() * s - size / 2, -size / 4);
  for (const auto& p : profile) v.emplace_back(p.x() * s - size / 2, p.y() * s - size / 2, size / 4);
  std::vector<Eigen::Vector3i> t;
  // Caps split into two convex quads: {0,1,2,3} and {0,3,4,5}.
  const std::array<std::array<int, 4>, 2> quads = {{{0, 1, 2, 3}, {0, 3, 4, 5}}};
  for (const auto& q : quads) {
    t.emplace_back(q[0], q[2], q[1]);
    t.emplace_back(q[0], q[3], q[2]);
    t.emplace_back(q[0] + 6, q[1] + 6, q[2] + 6);
    t.emplace_back(q[0] + 6, q[2] + 6, q[3] + 6);
  }
  for (int i = 0; i < 6; ++i) {
    const int j = (i + 1) % 6;
    t.emplace_back(i, j, j + 6);
    t.emplace_back(i, j + 6, i + 6);
  }
  return TriangleMesh(std::move(v), std::move(t));
}

TriangleMesh make_wall_x(double x, double half) {
  std::vector<Vec3> v = {{x, -half, -half}, {x, half, -half}, {x, half, half}, {x, -half, half}};
  std::vector<Eigen::Vector3i> t = {{0, 1, 2}, {0, 2, 3}};
  return TriangleMesh(std::move(v), std::move(t));
}

TriangleMesh make_blob(double radius, double amplitude, int subdivisions, unsigned seed) {
  const TriangleMesh sphere = make_icosphere(1.0, subdivisions);
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr int kLobes = 6;
  std::vector<Vec3> dirs;
  for (int i = 0; i < kLobes; ++i) dirs.push_back(Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized());
  std::vector<Vec3> verts;
  verts.reserve(sphere.vertices().size());
  for (const Vec3& v : sphere.vertices()) {
    double r = 1.0;
    for (const Vec3& d : dirs) r += amplitude * std::exp(-6.0 * (1.0 - v.dot(d)));
    verts.push_back(v * radius * r);
  }
  return TriangleMesh(std::move(verts), sphere.triangles());
}

TriangleMesh make_torus(double major, double minor, int segments, int sides) {
  std::vector<Vec3> v;
  std::vector<Eigen::Vector3i> t;
  for (int i = 0; i < segments; ++i) {
    const double u = 2.0 * M_PI * i / segments;
    for (int j = 0; j < sides; ++j) {
      const double w = 2.0 * M_PI * j / sides;
      v.emplace_back((major + minor * std::cos(w)) * std::cos(u), (major + minor * std::cos(w)) * std::sin(u),
                     minor * std::sin(w));
    }
  }
  for (int i = 0; i < segments; ++i) {
    for (int j = 0; j < sides; ++j) {
      const int a = i * sides + j;
      const int b = ((i + 1) % segments) * sides + j;
      const int c = ((i + 1) % segments) * sides + (j + 1) % sides;
      const int d = i * sides + (j + 1) % sides;
      t.emplace_back(a, b, c);
      t.emplace_back(a, c, d);
    }
  }
  return TriangleMesh(std::move(v), std::move(t));
}

TriangleMesh make_primitive(const std::string& name) {
  if (name == "sphere") return make_icosphere(0.125, 4);
  if (name == "cube") return make_box(Vec3::Constant(-0.125), Vec3::Constant(0.125));
  if (name == "lshape") return make_l_shape(0.25);
  if (name == "blob") return normalize_mesh(make_blob(0.1, 0.35, 4, 7));
  if (name == "torus") return normalize_mesh(make_torus(0.08, 0.035, 48, 24));
  throw MeshError("unknown primitive '" + name + "'");
}

}  // namespace scandp
