#pragma once

#include "scandp/camera.hpp"
#include "scandp/expert.hpp"
#include "scandp/mesh.hpp"
#include "scandp/path_optimizer.hpp"
#include "scandp/point_cloud.hpp"
#include "scandp/policy.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scandp {

enum class PolicyKind { kScanDP, kScanDPNoOpt, kRandom, kRandomHemisphere, kUniformHemisphere, kExpertReplay };

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);
inline bool needs_checkpoint(PolicyKind kind) { return kind == PolicyKind::kScanDP || kind == PolicyKind::kScanDPNoOpt; }

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::string mesh = "sphere";  // OBJ/PLY path, or a built-in primitive name
  double scale = 1.0;
  CameraModel camera;
  int steps = 500;  // T
  PolicyKind policy = PolicyKind::kExpertReplay;
  std::string checkpoint;  // required for scandp kinds unless handed in directly
  double noise_std = 0.0;
  double grid_extent = 0.8;
  double cell_size = 0.02;
  double coverage_epsilon = 0.01;
  bool ogm_coverage = false;  // score only points whose map cell is occupied (p >= optimizer.kappa_occ)
  double voxel_size = 0.005;
  double gt_radius = 0.004;
  int coverage_interval = 25;
  double max_step = 0.05;
  int baseline_viewpoints = 60;
  double orbit_radius_factor = kOrbitRadiusFactor;
  PathOptimizerConfig optimizer;
  ExpertConfig expert;  // used by expert-replay; steps and start azimuth are set per episode
  std::optional<Pose> initial_pose;  // defaults to the orbit point at azimuth 120 deg * init_pose_id
  int init_pose_id = 0;
  std::uint64_t seed = 0;

  void validate() const;
  std::string object_id() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

struct HorizonLog {
  int step = 0;
  int sampled = 0;
  int kept = 0;       // after the bubble filter
  int optimized = 0;  // after viewpoint extraction
  double loss = 0.0;
  bool empty = false;
};

struct RunRecord {
  std::string policy;
  std::string object;
  double scale = 1.0;
  double noise_std = 0.0;
  double fov_x = 0.0;
  double fov_y = 0.0;
  std::uint64_t seed = 0;
  int init_pose_id = 0;
  int steps = 0;

  std::vector<Pose> poses;                 // pose at each executed step
  std::vector<std::size_t> cloud_sizes;    // accumulated voxel count after each step
  std::vector<double> path_lengths;        // cumulative, per step
  std::vector<std::pair<int, double>> coverage_checkpoints;  // (steps executed, coverage)
  std::vector<HorizonLog> horizons;
  std::map<std::string, double> phase_seconds;
  std::vector<std::string> warnings;

  double coverage_final = 0.0;
  double path_length = 0.0;
  long poses_after_opt = 0;
  double runtime_s = 0.0;

  PointCloud final_cloud;
  std::optional<OccupancyGrid> grid;
};

/// Loads (or builds) the scan target for a scenario, normalised and scaled.
TriangleMesh scenario_mesh(const ScenarioConfig& config);

/// Ground-truth surface samples for a scenario mesh.
PointCloud ground_truth(const TriangleMesh& mesh, double radius);

/// Orbit-sphere starting pose for `init_pose_id`.
Pose default_initial_pose(const TriangleMesh& mesh, int init_pose_id, double radius_factor = kOrbitRadiusFactor);

/// Straight segments through `waypoints` starting at `from`, each split into
/// steps of at most `max_step`; every waypoint is reached exactly.
PoseHorizon densify(const Pose& from, const PoseHorizon& waypoints, double max_step);

struct EpisodeInputs {
  const TriangleMesh* mesh = nullptr;         // loaded from the config when null
  const PointCloud* ground_truth = nullptr;   // sampled from the mesh when null
  const PolicyCheckpoint* policy = nullptr;   // loaded from config.checkpoint when null
};

RunRecord run_episode(const ScenarioConfig& config, const EpisodeInputs& inputs = {});

inline constexpr const char* kCsvHeader =
    "policy,object,scale,noise_std,fov_x,fov_y,seed,init_pose_id,steps,coverage_final,path_length_m,"
    "poses_after_opt,runtime_s";

std::string csv_row(const RunRecord& record);
nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

/// Base file name for a run's artifacts.
std::string run_name(const RunRecord& record);

struct SuiteEntry {
  ScenarioConfig config;
  std::vector<std::uint64_t> seeds = {0};
  std::vector<int> init_pose_ids = {0, 1, 2};
};

struct SuiteResult {
  std::vector<RunRecord> records;  // sorted
  std::vector<std::string> failures;
};

/// Expands every entry over seeds and initial poses, runs the episodes
/// concurrently and writes metrics.csv, <run>.json, <run>.ply and <run>.ogm
/// into `output_dir`. Failed runs are reported and skipped.
SuiteResult run_suite(const std::vector<SuiteEntry>& entries, const std::filesystem::path& output_dir, int threads = 0,
                      const PolicyCheckpoint* policy = nullptr);

std::vector<SuiteEntry> suite_from_json(const nlohmann::json& j);

}  // namespace scandp
