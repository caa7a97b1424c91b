#include "scandp/camera.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace scandp {

void CameraModel::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("camera: width and height must be >= 1");
  if (!(fov_x > 0.0 && fov_x < 180.0) || !(fov_y > 0.0 && fov_y < 180.0)) {
    throw std::invalid_argument("camera: field of view must lie in (0, 180) degrees");
  }
  if (!(max_range > 0.0)) throw std::invalid_argument("camera: max_range must be positive");
}

Vec3 CameraModel::ray_direction(double u, double v) const {
  const double tx = std::tan(0.5 * fov_x * M_PI / 180.0);
  const double ty = std::tan(0.5 * fov_y * M_PI / 180.0);
  const double x = (2.0 * u / width - 1.0) * tx;
  const double y = (2.0 * v / height - 1.0) * ty;
  return Vec3(x, y, 1.0).normalized();
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (const float d : values) n += is_valid(d) ? 1 : 0;
  return n;
}

DepthMap render_depth(const TriangleMesh& mesh, const Pose& pose, const CameraModel& cam) {
  cam.validate();
  DepthMap depth(cam.width, cam.height);
  const Mat3 rot = pose.rotation.toRotationMatrix();
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Ray ray{pose.translation, rot * cam.ray_direction(u + 0.5, v + 0.5)};
      if (const auto hit = mesh.intersect(ray, cam.max_range)) {
        depth.at(u, v) = static_cast<float>(hit->distance);
      }
    }
  }
  return depth;
}

PointCloud backproject(const DepthMap& depth, const Pose& pose, const CameraModel& cam) {
  if (depth.width != cam.width || depth.height != cam.height ||
      depth.values.size() != static_cast<std::size_t>(cam.width) * cam.height) {
    throw std::invalid_argument("backproject: depth map dimensions do not match the camera");
  }
  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  const Mat3 rot = pose.rotation.toRotationMatrix();
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const float d = depth.at(u, v);
      if (!DepthMap::is_valid(d)) continue;
      cloud.points.push_back(pose.translation + rot * (cam.ray_direction(u + 0.5, v + 0.5) * double(d)));
    }
  }
  return cloud;
}

DepthMap add_depth_noise(const DepthMap& depth, double std_dev, std::uint64_t seed) {
  if (!(std_dev >= 0.0)) throw std::invalid_argument("add_depth_noise: std must be >= 0");
  if (std_dev == 0.0) return depth;
  DepthMap out = depth;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std_dev);
  for (float& d : out.values) {
    if (!DepthMap::is_valid(d)) continue;
    const double noisy = double(d) + gauss(rng);
    d = noisy > 0.0 ? static_cast<float>(noisy) : DepthMap::kInvalid;
    if (!DepthMap::is_valid(d)) d = DepthMap::kInvalid;
  }
  return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("depth file truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

void write_depth(const DepthMap& depth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(depth.width));
  put_u32(out, static_cast<std::uint32_t>(depth.height));
  for (const float d : depth.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &d, 4);
    put_u32(out, bits);
  }
}

DepthMap read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto w = get_u32(in);
  const auto h = get_u32(in);
  if (w == 0 || h == 0 || std::uint64_t(w) * h > (1u << 28)) throw std::runtime_error("bad depth header");
  DepthMap depth(static_cast<int>(w), static_cast<int>(h));
  for (float& d : depth.values) {
    const std::uint32_t bits = get_u32(in);
    std::memcpy(&d, &bits, 4);
  }
  return depth;
}

}  // namespace scandp
