#include "scandp/harness.hpp"

#include "scandp/baselines.hpp"
#include "scandp/metrics.hpp"
#include "scandp/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace scandp {

using json = nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Stopwatch {
 public:
  explicit Stopwatch(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() { sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

json pose_json(const Pose& p) {
  const Quat& q = p.rotation;
  return {{"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"rotation_wxyz", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from_json(const json& j) {
  const auto t = j.at("translation").get<std::vector<double>>();
  const auto q = j.at("rotation_wxyz").get<std::vector<double>>();
  if (t.size() != 3 || q.size() != 4) throw ConfigError("pose needs 3 translation and 4 quaternion entries");
  Pose p;
  p.translation = Vec3(t[0], t[1], t[2]);
  p.rotation = Quat(q[0], q[1], q[2], q[3]);
  if (p.rotation.norm() <= 0.0) throw ConfigError("pose quaternion is zero");
  p.rotation.normalize();
  return p;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kScanDP: return "scandp";
    case PolicyKind::kScanDPNoOpt: return "scandp-no-opt";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kRandomHemisphere: return "random-hemisphere";
    case PolicyKind::kUniformHemisphere: return "uniform-hemisphere";
    case PolicyKind::kExpertReplay: return "expert-replay";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(const std::string& name) {
  for (auto kind : {PolicyKind::kScanDP, PolicyKind::kScanDPNoOpt, PolicyKind::kRandom, PolicyKind::kRandomHemisphere,
                    PolicyKind::kUniformHemisphere, PolicyKind::kExpertReplay}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown policy kind '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
  if (!(coverage_epsilon > 0.0)) throw ConfigError("coverage_epsilon must be positive");
  if (!(voxel_size > 0.0)) throw ConfigError("voxel_size must be positive");
  if (!(gt_radius > 0.0)) throw ConfigError("gt_radius must be positive");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
  if (coverage_interval < 1) throw ConfigError("coverage_interval must be >= 1");
  if (baseline_viewpoints < 1) throw ConfigError("baseline_viewpoints must be >= 1");
  if (init_pose_id < 0) throw ConfigError("init_pose_id must be >= 0");
  try {
    camera.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const double cells = grid_extent / cell_size;
  if (!(cell_size > 0.0) || std::abs(cells - std::round(cells)) > 1e-9) {
    throw ConfigError("grid_extent / cell_size must be integral");
  }
}

std::string ScenarioConfig::object_id() const {
  return std::filesystem::path(mesh).stem().string();
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  try {
    read_opt(j, "mesh", c.mesh);
    read_opt(j, "scale", c.scale);
    read_opt(j, "steps", c.steps);
    if (j.contains("policy")) c.policy = parse_policy_kind(j.at("policy").get<std::string>());
    read_opt(j, "checkpoint", c.checkpoint);
    read_opt(j, "noise_std", c.noise_std);
    read_opt(j, "coverage_epsilon", c.coverage_epsilon);
    read_opt(j, "ogm_coverage", c.ogm_coverage);
    read_opt(j, "voxel_size", c.voxel_size);
    read_opt(j, "gt_radius", c.gt_radius);
    read_opt(j, "coverage_interval", c.coverage_interval);
    read_opt(j, "max_step", c.max_step);
    read_opt(j, "baseline_viewpoints", c.baseline_viewpoints);
    read_opt(j, "orbit_radius_factor", c.orbit_radius_factor);
    read_opt(j, "init_pose_id", c.init_pose_id);
    read_opt(j, "seed", c.seed);
    if (j.contains("camera")) {
      const auto& cam = j.at("camera");
      read_opt(cam, "width", c.camera.width);
      read_opt(cam, "height", c.camera.height);
      read_opt(cam, "fov_x", c.camera.fov_x);
      read_opt(cam, "fov_y", c.camera.fov_y);
      read_opt(cam, "max_range", c.camera.max_range);
    }
    if (j.contains("grid")) {
      read_opt(j.at("grid"), "extent", c.grid_extent);
      read_opt(j.at("grid"), "cell_size", c.cell_size);
    }
    if (j.contains("optimizer")) {
      read_opt(j.at("optimizer"), "kappa_occ", c.optimizer.kappa_occ);
      read_opt(j.at("optimizer"), "r_min", c.optimizer.r_min);
      read_opt(j.at("optimizer"), "eta", c.optimizer.eta);
    }
    if (j.contains("expert")) {
      const auto& e = j.at("expert");
      read_opt(e, "azimuth_step_deg", c.expert.azimuth_step_deg);
      read_opt(e, "elevation_amplitude_deg", c.expert.elevation_amplitude_deg);
      read_opt(e, "jitter_deg", c.expert.jitter_deg);
      read_opt(e, "radius_factor", c.expert.radius_factor);
      read_opt(e, "max_step", c.expert.max_step);
    }
    if (j.contains("initial_pose")) c.initial_pose = pose_from_json(j.at("initial_pose"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scenario field: ") + e.what());
  }
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j = {{"mesh", c.mesh},
            {"scale", c.scale},
            {"steps", c.steps},
            {"policy", to_string(c.policy)},
            {"checkpoint", c.checkpoint},
            {"noise_std", c.noise_std},
            {"coverage_epsilon", c.coverage_epsilon},
            {"ogm_coverage", c.ogm_coverage},
            {"voxel_size", c.voxel_size},
            {"gt_radius", c.gt_radius},
            {"coverage_interval", c.coverage_interval},
            {"max_step", c.max_step},
            {"baseline_viewpoints", c.baseline_viewpoints},
            {"orbit_radius_factor", c.orbit_radius_factor},
            {"init_pose_id", c.init_pose_id},
            {"seed", c.seed},
            {"camera",
             {{"width", c.camera.width},
              {"height", c.camera.height},
              {"fov_x", c.camera.fov_x},
              {"fov_y", c.camera.fov_y},
              {"max_range", c.camera.max_range}}},
            {"grid", {{"extent", c.grid_extent}, {"cell_size", c.cell_size}}},
            {"optimizer", {{"kappa_occ", c.optimizer.kappa_occ}, {"r_min", c.optimizer.r_min}, {"eta", c.optimizer.eta}}},
            {"expert",
             {{"azimuth_step_deg", c.expert.azimuth_step_deg},
              {"elevation_amplitude_deg", c.expert.elevation_amplitude_deg},
              {"jitter_deg", c.expert.jitter_deg},
              {"radius_factor", c.expert.radius_factor},
              {"max_step", c.expert.max_step}}}};
  if (c.initial_pose) j["initial_pose"] = pose_json(*c.initial_pose);
  return j;
}

TriangleMesh scenario_mesh(const ScenarioConfig& config) {
  const std::filesystem::path path(config.mesh);
  if (std::filesystem::exists(path)) return load_mesh(path, config.scale);
  if (path.has_extension()) throw ConfigError("mesh file not found: " + config.mesh);
  try {
    return normalize_mesh(make_primitive(config.mesh), config.scale);
  } catch (const MeshError&) {
    throw ConfigError("'" + config.mesh + "' is neither a mesh file nor a built-in primitive");
  }
}

PointCloud ground_truth(const TriangleMesh& mesh, double radius) {
  return poisson_disk_sample(mesh, radius, PoissonDiskOptions{});
}

Pose default_initial_pose(const TriangleMesh& mesh, int init_pose_id, double radius_factor) {
  return orbit_pose(mesh.bounds().center(), radius_factor * mesh.bounding_radius(), 120.0 * kDeg * init_pose_id, 0.0);
}

PoseHorizon densify(const Pose& from, const PoseHorizon& waypoints, double max_step) {
  PoseHorizon out;
  Pose prev = from;
  for (const Pose& w : waypoints) {
    const double len = (w.translation - prev.translation).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / max_step - 1e-9)));
    for (int k = 1; k < n; ++k) out.push_back(blend(prev, w, double(k) / n));
    out.push_back(w);
    prev = w;
  }
  return out;
}

RunRecord run_episode(const ScenarioConfig& config, const EpisodeInputs& inputs) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.policy = to_string(config.policy);
  rec.object = config.object_id();
  rec.scale = config.scale;
  rec.noise_std = config.noise_std;
  rec.fov_x = config.camera.fov_x;
  rec.fov_y = config.camera.fov_y;
  rec.seed = config.seed;
  rec.init_pose_id = config.init_pose_id;
  double& t_render = rec.phase_seconds["render"];
  double& t_integrate = rec.phase_seconds["integrate"];
  double& t_plan = rec.phase_seconds["plan"];
  double& t_optimize = rec.phase_seconds["optimize"];
  double& t_coverage = rec.phase_seconds["coverage"];

  std::optional<TriangleMesh> owned_mesh;
  if (!inputs.mesh) owned_mesh = scenario_mesh(config);
  const TriangleMesh& mesh = inputs.mesh ? *inputs.mesh : *owned_mesh;
  std::optional<PointCloud> owned_gt;
  if (!inputs.ground_truth) owned_gt = ground_truth(mesh, config.gt_radius);
  const PointCloud& gt = inputs.ground_truth ? *inputs.ground_truth : *owned_gt;
  std::optional<PolicyCheckpoint> owned_policy;
  const PolicyCheckpoint* policy = inputs.policy;
  if (needs_checkpoint(config.policy) && !policy) {
    if (config.checkpoint.empty()) throw ConfigError("policy '" + rec.policy + "' needs a checkpoint");
    owned_policy = PolicyCheckpoint::load(config.checkpoint);
    policy = &*owned_policy;
  }

  const Vec3 center = mesh.bounds().center();
  const GridSpec spec{center, config.grid_extent, config.cell_size};
  OccupancyGrid grid = spec.make_grid();
  VoxelAccumulator cloud(config.voxel_size);
  std::mt19937_64 rng(mix_seed(config.seed, 1));
  const double orbit_radius = config.orbit_radius_factor * mesh.bounding_radius();

  Pose pose = config.initial_pose ? *config.initial_pose
                                  : default_initial_pose(mesh, config.init_pose_id, config.orbit_radius_factor);
  std::deque<Pose> queue;
  bool precomputed = false;

  // Baselines and the expert run a fixed plan from the start pose.
  if (config.policy == PolicyKind::kExpertReplay) {
    ExpertConfig ec = config.expert;
    ec.steps = config.steps;
    ec.start_azimuth_deg = 120.0 * config.init_pose_id;
    auto poses = expert_trajectory(mesh, mix_seed(config.seed, 2), ec);
    if (!config.initial_pose) pose = poses.front();
    queue.assign(poses.begin() + 1, poses.end());
    rec.poses_after_opt = static_cast<long>(poses.size());
    precomputed = true;
  } else if (!needs_checkpoint(config.policy)) {
    ViewpointSet set;
    const int n = config.baseline_viewpoints;
    if (config.policy == PolicyKind::kRandom) {
      const Aabb bounds{center - Vec3::Constant(0.5 * spec.extent), center + Vec3::Constant(0.5 * spec.extent)};
      set = random_poses(n, bounds, mesh.bounds().inflated(0.1), center, mix_seed(config.seed, 3));
    } else if (config.policy == PolicyKind::kRandomHemisphere) {
      set = random_hemisphere(n, center, orbit_radius, mix_seed(config.seed, 4));
    } else {
      set = fibonacci_hemisphere(n, center, orbit_radius);
    }
    const PoseHorizon tour = tsp_order(set.poses, pose);
    const PoseHorizon path = densify(pose, tour, config.max_step);
    queue.assign(path.begin(), path.end());
    rec.poses_after_opt = static_cast<long>(tour.size());
    precomputed = true;
  }

  auto clamp_to_workspace = [&](Pose p, int step) {
    if (!spec.contains(p.translation)) {
      const Vec3 lo = center - Vec3::Constant(0.5 * spec.extent);
      const Vec3 hi = center + Vec3::Constant(0.5 * spec.extent);
      std::ostringstream msg;
      msg << "step " << step << ": pose (" << p.translation.transpose() << ") outside the working cube, clamped";
      rec.warnings.push_back(msg.str());
      p.translation = p.translation.cwiseMax(lo).cwiseMin(hi);
    }
    return p;
  };

  auto record_coverage = [&](int executed) {
    Stopwatch sw(t_coverage);
    PointCloud scan = cloud.centroids();
    if (config.ogm_coverage) {
      std::erase_if(scan.points, [&](const Vec3& p) {
        const CellIndex c = grid.world_to_cell(p);
        return !grid.in_bounds(c) || grid.probability_of(c) < config.optimizer.kappa_occ;
      });
    }
    const double c = coverage(scan, gt, config.coverage_epsilon);
    rec.coverage_checkpoints.emplace_back(executed, c);
  };

  double travelled = 0.0;
  for (int t = 0; t < config.steps; ++t) {
    if (t > 0) {
      if (queue.empty()) break;  // fixed plan exhausted
      const Pose next = queue.front();
      queue.pop_front();
      travelled += (next.translation - pose.translation).norm();
      pose = next;
    }
    rec.poses.push_back(pose);
    rec.path_lengths.push_back(travelled);

    PointCloud points;
    {
      Stopwatch sw(t_render);
      DepthMap depth = render_depth(mesh, pose, config.camera);
      if (config.noise_std > 0.0) depth = add_depth_noise(depth, config.noise_std, mix_seed(config.seed, 1000 + t));
      points = backproject(depth, pose, config.camera);
    }
    {
      Stopwatch sw(t_integrate);
      grid.integrate_scan(pose.translation, points);
      cloud.add(points);
    }
    rec.cloud_sizes.push_back(cloud.voxel_count());
    rec.steps = t + 1;
    if ((t + 1) % config.coverage_interval == 0) record_coverage(t + 1);

    if (precomputed || t + 1 >= config.steps || !queue.empty()) continue;

    // Re-plan from the current observation.
    PoseHorizon horizon;
    {
      Stopwatch sw(t_plan);
      const std::size_t h = static_cast<std::size_t>(policy->config().history);
      const std::size_t from = rec.poses.size() > h ? rec.poses.size() - h : 0;
      const std::span<const Pose> history(rec.poses.data() + from, rec.poses.size() - from);
      const VectorR cond = policy_condition(*policy, grid_to_sparse<Real>(grid, policy->config().ogm_mode), history);
      horizon = sample_actions(*policy, cond, rng);
      for (Pose& p : horizon) p = clamp_to_workspace(p, t);
    }
    HorizonLog log;
    log.step = t;
    log.sampled = static_cast<int>(horizon.size());
    if (config.policy == PolicyKind::kScanDPNoOpt) {
      log.kept = log.optimized = log.sampled;
      queue.assign(horizon.begin(), horizon.end());
    } else {
      Stopwatch sw(t_optimize);
      const BubbleResult safe = bubble_filter(horizon, grid, config.optimizer.kappa_occ, config.optimizer.r_min);
      log.kept = static_cast<int>(safe.kept.size());
      if (safe.kept.empty()) {
        log.empty = true;
        queue.push_back(pose);  // hold, re-sample next step
      } else {
        const OptimizedHorizon opt = extract_viewpoints(safe.kept, config.optimizer.eta);
        log.optimized = static_cast<int>(opt.poses.size());
        log.loss = opt.loss;
        const PoseHorizon path = densify(pose, opt.poses, config.max_step);
        queue.assign(path.begin(), path.end());
      }
    }
    rec.poses_after_opt += log.optimized;
    rec.horizons.push_back(log);
  }
  if (rec.coverage_checkpoints.empty() || rec.coverage_checkpoints.back().first != rec.steps) record_coverage(rec.steps);

  rec.final_cloud = cloud.centroids();
  rec.coverage_final = rec.coverage_checkpoints.back().second;
  rec.path_length = travelled;
  rec.grid = std::move(grid);
  rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

std::string csv_row(const RunRecord& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << r.policy << ',' << r.object << ',' << r.scale << ',' << r.noise_std << ',' << r.fov_x << ',' << r.fov_y << ','
      << r.seed << ',' << r.init_pose_id << ',' << r.steps << ',' << r.coverage_final << ',' << r.path_length << ','
      << r.poses_after_opt << ',' << std::setprecision(4) << r.runtime_s;
  return out.str();
}

std::string run_name(const RunRecord& r) {
  std::ostringstream out;
  out << r.policy << '_' << r.object << "_s" << r.scale << "_n" << r.noise_std << "_f" << r.fov_x << 'x' << r.fov_y
      << "_seed" << r.seed << "_init" << r.init_pose_id;
  return out.str();
}

json record_to_json(const RunRecord& r) {
  json j = {{"policy", r.policy},
            {"object", r.object},
            {"scale", r.scale},
            {"noise_std", r.noise_std},
            {"fov_x", r.fov_x},
            {"fov_y", r.fov_y},
            {"seed", r.seed},
            {"init_pose_id", r.init_pose_id},
            {"steps", r.steps},
            {"coverage_final", r.coverage_final},
            {"path_length_m", r.path_length},
            {"poses_after_opt", r.poses_after_opt},
            {"runtime_s", r.runtime_s},
            {"phase_seconds", r.phase_seconds},
            {"warnings", r.warnings},
            {"cloud_sizes", r.cloud_sizes},
            {"path_lengths", r.path_lengths}};
  json poses = json::array();
  for (const Pose& p : r.poses) poses.push_back(pose_json(p));
  j["poses"] = poses;
  json cov = json::array();
  for (const auto& [step, c] : r.coverage_checkpoints) cov.push_back({{"step", step}, {"coverage", c}});
  j["coverage_checkpoints"] = cov;
  json hz = json::array();
  for (const HorizonLog& h : r.horizons) {
    hz.push_back({{"step", h.step},
                  {"sampled", h.sampled},
                  {"kept", h.kept},
                  {"optimized", h.optimized},
                  {"loss", h.loss},
                  {"empty", h.empty}});
  }
  j["horizons"] = hz;
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.policy = j.at("policy");
  r.object = j.at("object");
  r.scale = j.at("scale");
  r.noise_std = j.at("noise_std");
  r.fov_x = j.at("fov_x");
  r.fov_y = j.at("fov_y");
  r.seed = j.at("seed");
  r.init_pose_id = j.at("init_pose_id");
  r.steps = j.at("steps");
  r.coverage_final = j.at("coverage_final");
  r.path_length = j.at("path_length_m");
  r.poses_after_opt = j.at("poses_after_opt");
  r.runtime_s = j.at("runtime_s");
  read_opt(j, "phase_seconds", r.phase_seconds);
  read_opt(j, "warnings", r.warnings);
  read_opt(j, "cloud_sizes", r.cloud_sizes);
  read_opt(j, "path_lengths", r.path_lengths);
  for (const auto& p : j.at("poses")) r.poses.push_back(pose_from_json(p));
  for (const auto& c : j.at("coverage_checkpoints")) r.coverage_checkpoints.emplace_back(c.at("step"), c.at("coverage"));
  if (j.contains("horizons")) {
    for (const auto& h : j.at("horizons")) {
      r.horizons.push_back({h.at("step"), h.at("sampled"), h.at("kept"), h.at("optimized"), h.at("loss"), h.at("empty")});
    }
  }
  return r;
}

std::vector<SuiteEntry> suite_from_json(const json& j) {
  const json& list = j.is_array() ? j : j.at("scenarios");
  std::vector<SuiteEntry> entries;
  for (const auto& item : list) {
    SuiteEntry e;
    e.config = scenario_from_json(item);
    try {
      read_opt(item, "seeds", e.seeds);
      read_opt(item, "init_pose_ids", e.init_pose_ids);
    } catch (const json::exception& ex) {
      throw ConfigError(std::string("bad suite field: ") + ex.what());
    }
    if (e.seeds.empty() || e.init_pose_ids.empty()) throw ConfigError("seeds and init_pose_ids must be nonempty");
    entries.push_back(std::move(e));
  }
  return entries;
}

SuiteResult run_suite(const std::vector<SuiteEntry>& entries, const std::filesystem::path& output_dir, int threads,
                      const PolicyCheckpoint* policy) {
  std::filesystem::create_directories(output_dir);
  std::vector<ScenarioConfig> jobs;
  for (const SuiteEntry& e : entries) {
    for (std::uint64_t seed : e.seeds) {
      for (int init : e.init_pose_ids) {
        ScenarioConfig c = e.config;
        c.seed = seed;
        c.init_pose_id = init;
        c.validate();
        jobs.push_back(std::move(c));
      }
    }
  }

  // Meshes, ground truth and checkpoints are shared across episodes.
  std::map<std::pair<std::string, double>, std::pair<TriangleMesh, PointCloud>> targets;
  std::map<std::string, PolicyCheckpoint> checkpoints;
  SuiteResult result;
  for (const ScenarioConfig& c : jobs) {
    const auto key = std::make_pair(c.mesh, c.scale);
    if (!targets.count(key)) {
      TriangleMesh mesh = scenario_mesh(c);
      PointCloud gt = ground_truth(mesh, c.gt_radius);
      targets.emplace(key, std::make_pair(std::move(mesh), std::move(gt)));
    }
    if (needs_checkpoint(c.policy) && !policy && !checkpoints.count(c.checkpoint)) {
      if (c.checkpoint.empty()) throw ConfigError("policy '" + to_string(c.policy) + "' needs a checkpoint");
      checkpoints.emplace(c.checkpoint, PolicyCheckpoint::load(c.checkpoint));
    }
  }

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const ScenarioConfig& c = jobs[i];
      try {
        const auto& target = targets.at({c.mesh, c.scale});
        EpisodeInputs in;
        in.mesh = &target.first;
        in.ground_truth = &target.second;
        if (needs_checkpoint(c.policy)) in.policy = policy ? policy : &checkpoints.at(c.checkpoint);
        RunRecord rec = run_episode(c, in);
        const std::string name = run_name(rec);
        write_ply(rec.final_cloud, output_dir / (name + ".ply"));
        rec.grid->save((output_dir / (name + ".ogm")).string());
        std::ofstream(output_dir / (name + ".json")) << record_to_json(rec).dump(1) << '\n';
        std::lock_guard lock(mutex);
        result.records.push_back(std::move(rec));
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        result.failures.push_back(to_string(c.policy) + " seed " + std::to_string(c.seed) + " init " +
                                  std::to_string(c.init_pose_id) + ": " + e.what());
      }
    }
  };
  const int n = std::max(1, threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min<int>(n, static_cast<int>(jobs.size())); ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::sort(result.records.begin(), result.records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.policy, a.object, a.scale, a.noise_std, a.fov_x, a.fov_y, a.seed, a.init_pose_id) <
           std::tie(b.policy, b.object, b.scale, b.noise_std, b.fov_x, b.fov_y, b.seed, b.init_pose_id);
  });
  std::sort(result.failures.begin(), result.failures.end());
  std::ofstream csv(output_dir / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + (output_dir / "metrics.csv").string());
  csv << kCsvHeader << '\n';
  for (const RunRecord& r : result.records) csv << csv_row(r) << '\n';
  return result;
}

}  // namespace scandp
