#include "scandp/expert.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace scandp {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::filesystem::path depth_file(const std::filesystem::path& dir, std::size_t t) {
  char name[32];
  std::snprintf(name, sizeof(name), "depth_%05zu.bin", t);
  return dir / name;
}

}  // namespace

Pose orbit_pose(const Vec3& center, double radius, double azimuth_rad, double elevation_rad) {
  const Vec3 dir(std::cos(elevation_rad) * std::cos(azimuth_rad), std::cos(elevation_rad) * std::sin(azimuth_rad),
                 std::sin(elevation_rad));
  return look_at(center + radius * dir, center);
}

std::vector<Pose> expert_trajectory(const TriangleMesh& mesh, std::uint64_t seed, const ExpertConfig& config) {
  if (config.steps < 1) throw std::invalid_argument("expert trajectory needs at least one step");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 360.0);
  std::normal_distribution<double> jitter(0.0, config.jitter_deg * kDeg);
  const double phi0 = (config.start_azimuth_deg ? *config.start_azimuth_deg : uniform(rng)) * kDeg;
  const Vec3 center = mesh.bounds().center();
  const double radius = config.radius_factor * mesh.bounding_radius();

  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(config.steps));
  for (int t = 0; t < config.steps; ++t) {
    const double phi = phi0 + t * config.azimuth_step_deg * kDeg;
    double az = phi;
    double el = config.elevation_amplitude_deg * kDeg * std::sin(2.0 * phi);
    if (config.jitter_deg > 0.0) {
      az += jitter(rng);
      el += jitter(rng);
    }
    Pose p = orbit_pose(center, radius, az, el);
    if (!poses.empty()) {
      const Vec3 step = p.translation - poses.back().translation;
      if (step.norm() > config.max_step) p = look_at(poses.back().translation + step * (config.max_step / step.norm()), center);
    }
    poses.push_back(p);
  }
  return poses;
}

Demonstration generate_expert_demo(const TriangleMesh& mesh, const CameraModel& cam, std::uint64_t seed,
                                   const ExpertConfig& config, const std::string& object_id) {
  Demonstration demo;
  demo.object_id = object_id;
  demo.seed = seed;
  demo.poses = expert_trajectory(mesh, seed, config);
  demo.depths.reserve(demo.poses.size());
  for (const Pose& p : demo.poses) demo.depths.push_back(render_depth(mesh, p, cam));
  return demo;
}

void save_demo(const Demonstration& demo, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json log;
  log["object_id"] = demo.object_id;
  log["seed"] = demo.seed;
  auto& poses = log["poses"];
  poses = nlohmann::json::array();
  for (const Pose& p : demo.poses) {
    const Quat& q = p.rotation;
    poses.push_back({{"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
                     {"rotation_wxyz", {q.w(), q.x(), q.y(), q.z()}}});
  }
  std::ofstream out(dir / "poses.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "poses.json").string());
  out << log.dump(1) << '\n';
  for (std::size_t t = 0; t < demo.depths.size(); ++t) write_depth(demo.depths[t], depth_file(dir, t));
}

Demonstration load_demo(const std::filesystem::path& dir) {
  std::ifstream in(dir / "poses.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "poses.json").string());
  const auto log = nlohmann::json::parse(in);
  Demonstration demo;
  demo.object_id = log.at("object_id").get<std::string>();
  demo.seed = log.at("seed").get<std::uint64_t>();
  for (const auto& jp : log.at("poses")) {
    const auto t = jp.at("translation").get<std::vector<double>>();
    const auto q = jp.at("rotation_wxyz").get<std::vector<double>>();
    if (t.size() != 3 || q.size() != 4) throw std::runtime_error("malformed pose in " + (dir / "poses.json").string());
    Pose p;
    p.translation = Vec3(t[0], t[1], t[2]);
    p.rotation = Quat(q[0], q[1], q[2], q[3]).normalized();
    demo.poses.push_back(p);
  }
  for (std::size_t t = 0; t < demo.poses.size(); ++t) {
    const auto path = depth_file(dir, t);
    if (!std::filesystem::exists(path)) break;
    demo.depths.push_back(read_depth(path));
  }
  if (!demo.depths.empty() && demo.depths.size() != demo.poses.size()) {
    throw std::runtime_error("demonstration " + dir.string() + " has fewer depth maps than poses");
  }
  return demo;
}

Dataset build_dataset(const std::vector<Demonstration>& demos, const CameraModel& cam, const GridSpec& spec, int horizon,
                      int history) {
  if (horizon < 1 || history < 1) throw TrainingError("horizon and history must be >= 1");
  Dataset data;
  data.workspace = spec.workspace();
  std::vector<Pose> targets;
  for (const Demonstration& demo : demos) {
    const int steps = static_cast<int>(demo.poses.size());
    if (steps < horizon + history) {
      throw TrainingError("demonstration '" + demo.object_id + "' has " + std::to_string(steps) +
                          " steps; at least horizon + history = " + std::to_string(horizon + history) + " required");
    }
    if (demo.depths.size() != demo.poses.size()) throw TrainingError("demonstration is missing depth maps");
    OccupancyGrid grid = spec.make_grid();
    for (int t = 0; t + horizon < steps; ++t) {
      const Pose& pose = demo.poses[static_cast<std::size_t>(t)];
      grid.integrate_scan(pose.translation, backproject(demo.depths[static_cast<std::size_t>(t)], pose, cam));
      if (t < history - 1) continue;
      TrainingSample sample;
      sample.snapshot = data.snapshots.size();
      sample.history.assign(demo.poses.begin() + (t - history + 1), demo.poses.begin() + t + 1);
      sample.target.assign(demo.poses.begin() + t + 1, demo.poses.begin() + t + 1 + horizon);
      targets.insert(targets.end(), sample.target.begin(), sample.target.end());
      data.snapshots.push_back(grid.snapshot());
      data.samples.push_back(std::move(sample));
    }
  }
  if (data.samples.empty()) throw TrainingError("no demonstrations given");
  data.normalizer = ActionNormalizer::fit(targets);
  return data;
}

}  // namespace scandp
