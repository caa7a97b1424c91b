#include "oracles.hpp"

#include "scandp/harness.hpp"
#include "scandp/metrics.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_map>

using namespace scandp;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int count, double half = 0.1) {
  std::uniform_real_distribution<double> u(-half, half);
  PointCloud c;
  for (int i = 0; i < count; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

// Small camera and short budgets keep each episode well under a second.
ScenarioConfig quick_config(PolicyKind kind, int steps) {
  ScenarioConfig c;
  c.mesh = "sphere";
  c.policy = kind;
  c.steps = steps;
  c.camera.width = 48;
  c.camera.height = 48;
  c.coverage_interval = 5;
  c.baseline_viewpoints = 12;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("scandp_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Coverage, IdentityAndEmpty) {
  std::mt19937_64 rng(1);
  const PointCloud gt = random_cloud(rng, 500);
  EXPECT_EQ(coverage(gt, gt, 0.01), 1.0);
  EXPECT_EQ(coverage(PointCloud{}, gt, 0.01), 0.0);
  EXPECT_THROW(coverage(gt, gt, 0.0), std::invalid_argument);
}

TEST(Coverage, ThreeOfFour) {
  PointCloud gt, scan;
  gt.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  scan.points = {{0.005, 0, 0}, {1, 0.009, 0}, {0, 1, 0.0099}, {0, 0, 1.02}};
  EXPECT_EQ(coverage(scan, gt, 0.01), 0.75);
  // Inclusive threshold: a point at exactly epsilon counts.
  scan.points = {{0.25, 0, 0}};
  gt.points = {{0, 0, 0}};
  EXPECT_EQ(coverage(scan, gt, 0.25), 1.0);
}

TEST(Coverage, MatchesAllPairsScan) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud gt = random_cloud(rng, 1000);
    const PointCloud scan = random_cloud(rng, 1000);
    for (double eps : {0.005, 0.01, 0.03}) EXPECT_EQ(coverage(scan, gt, eps), oracle::coverage(scan, gt, eps));
  }
}

TEST(Coverage, RigidMotionInvariant) {
  std::mt19937_64 rng(3);
  const PointCloud gt = random_cloud(rng, 800);
  const PointCloud scan = random_cloud(rng, 800);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 t(0.3, -1.2, 4.0);
  PointCloud gt2, scan2;
  for (const Vec3& p : gt.points) gt2.points.push_back(r * p + t);
  for (const Vec3& p : scan.points) scan2.points.push_back(r * p + t);
  // Distances near epsilon can flip under rounding; compare through the oracle.
  EXPECT_EQ(coverage(scan2, gt2, 0.02), oracle::coverage(scan2, gt2, 0.02));
  EXPECT_NEAR(coverage(scan2, gt2, 0.02), coverage(scan, gt, 0.02), 3.0 / 800);
}

TEST(Coverage, MonotoneOverAccumulatingScans) {
  std::mt19937_64 rng(4);
  const PointCloud gt = random_cloud(rng, 1000);
  PointCloud scan;
  double prev = 0.0;
  for (int i = 0; i < 10; ++i) {
    scan.append(random_cloud(rng, 100));
    const double c = coverage(scan, gt, 0.015);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(PathLength, Examples) {
  EXPECT_EQ(path_length(std::vector<Vec3>{}), 0.0);
  EXPECT_EQ(path_length(std::vector<Vec3>{Vec3(1, 2, 3)}), 0.0);
  EXPECT_NEAR(path_length(std::vector<Vec3>{{0, 0, 0}, {3, 4, 0}, {3, 4, 2}}), 7.0, 1e-12);
}

TEST(VoxelDownsample, MatchesHashOracle) {
  std::mt19937_64 rng(5);
  const PointCloud cloud = random_cloud(rng, 100000, 0.2);
  const double voxel = 0.01;
  std::unordered_map<std::uint64_t, std::pair<Vec3, int>> cells;
  for (const Vec3& p : cloud.points) {
    const auto key = pack_key(std::int64_t(std::floor(p.x() / voxel)), std::int64_t(std::floor(p.y() / voxel)),
                              std::int64_t(std::floor(p.z() / voxel)));
    auto& cell = cells.try_emplace(key, Vec3::Zero(), 0).first->second;
    cell.first += p;
    cell.second += 1;
  }
  const PointCloud down = voxel_downsample(cloud, voxel);
  ASSERT_EQ(down.size(), cells.size());
  for (const Vec3& c : down.points) {
    const auto key = pack_key(std::int64_t(std::floor(c.x() / voxel)), std::int64_t(std::floor(c.y() / voxel)),
                              std::int64_t(std::floor(c.z() / voxel)));
    ASSERT_TRUE(cells.count(key));
    EXPECT_LT((c - cells[key].first / cells[key].second).norm(), 1e-12);
  }
  VoxelAccumulator acc(voxel);
  PointCloud half1, half2;
  for (std::size_t i = 0; i < cloud.size(); ++i) (i % 2 ? half1 : half2).points.push_back(cloud.points[i]);
  acc.add(half1);
  acc.add(half2);
  const PointCloud incremental = acc.centroids();
  ASSERT_EQ(incremental.size(), down.size());
  for (std::size_t i = 0; i < down.size(); ++i) EXPECT_LT((incremental.points[i] - down.points[i]).norm(), 1e-12);
}

TEST(Densify, StepsBoundedAndWaypointsReached) {
  const Pose from = look_at(Vec3(0.4, 0, 0), Vec3::Zero());
  const PoseHorizon way{look_at(Vec3(0, 0.4, 0), Vec3::Zero()), look_at(Vec3(0, 0.4, 0.01), Vec3::Zero())};
  const PoseHorizon path = densify(from, way, 0.05);
  ASSERT_FALSE(path.empty());
  EXPECT_EQ(path.back().translation, way.back().translation);
  Vec3 prev = from.translation;
  for (const Pose& p : path) {
    EXPECT_LE((p.translation - prev).norm(), 0.05 + 1e-12);
    prev = p.translation;
  }
  EXPECT_EQ(std::count_if(path.begin(), path.end(), [&](const Pose& p) { return p.translation == way[0].translation; }), 1);
  EXPECT_EQ(path.size(), std::size_t(std::ceil(0.4 * std::sqrt(2.0) / 0.05)) + 1);
}

TEST(RunEpisode, SingleStep) {
  const RunRecord r = run_episode(quick_config(PolicyKind::kExpertReplay, 1));
  EXPECT_EQ(r.steps, 1);
  EXPECT_EQ(r.poses.size(), 1u);
  EXPECT_EQ(r.path_length, 0.0);
  ASSERT_EQ(r.coverage_checkpoints.size(), 1u);
  EXPECT_GT(r.coverage_final, 0.0);
  EXPECT_LT(r.coverage_final, 0.5);
}

TEST(RunEpisode, DeterministicAndMonotone) {
  for (PolicyKind kind : {PolicyKind::kExpertReplay, PolicyKind::kRandom, PolicyKind::kRandomHemisphere,
                          PolicyKind::kUniformHemisphere}) {
    ScenarioConfig c = quick_config(kind, 40);
    c.noise_std = 0.01;
    c.seed = 7;
    const RunRecord a = run_episode(c);
    const RunRecord b = run_episode(c);
    EXPECT_EQ(a.coverage_final, b.coverage_final) << to_string(kind);
    EXPECT_EQ(a.path_length, b.path_length);
    ASSERT_EQ(a.poses.size(), b.poses.size());
    for (std::size_t i = 0; i < a.poses.size(); ++i) EXPECT_EQ(a.poses[i].translation, b.poses[i].translation);
    double prev = 0.0;
    for (const auto& [step, cov] : a.coverage_checkpoints) {
      EXPECT_GE(cov, prev);
      EXPECT_LE(cov, 1.0);
      prev = cov;
    }
    for (std::size_t i = 1; i < a.cloud_sizes.size(); ++i) EXPECT_GE(a.cloud_sizes[i], a.cloud_sizes[i - 1]);
    for (std::size_t i = 1; i < a.poses.size(); ++i) {
      EXPECT_LE((a.poses[i].translation - a.poses[i - 1].translation).norm(), c.max_step + 1e-9);
    }
    EXPECT_NEAR(a.path_length, path_length(a.poses), 1e-9);
  }
}

TEST(RunEpisode, OgmCoverageScoresOccupiedSubset) {
  ScenarioConfig c = quick_config(PolicyKind::kExpertReplay, 40);
  c.noise_std = 0.05;
  const RunRecord raw = run_episode(c);
  c.ogm_coverage = true;
  const RunRecord ogm = run_episode(c);
  ASSERT_EQ(raw.coverage_checkpoints.size(), ogm.coverage_checkpoints.size());
  for (std::size_t i = 0; i < raw.coverage_checkpoints.size(); ++i) {
    EXPECT_LE(ogm.coverage_checkpoints[i].second, raw.coverage_checkpoints[i].second);
  }
  EXPECT_EQ(ogm.path_length, raw.path_length);

  PointCloud kept;
  for (const Vec3& p : ogm.final_cloud.points) {
    const CellIndex cell = ogm.grid->world_to_cell(p);
    if (ogm.grid->in_bounds(cell) && ogm.grid->probability_of(cell) >= c.optimizer.kappa_occ) kept.points.push_back(p);
  }
  ASSERT_LT(kept.size(), ogm.final_cloud.size());
  const PointCloud gt = ground_truth(scenario_mesh(c), c.gt_radius);
  EXPECT_EQ(ogm.coverage_final, oracle::coverage(kept, gt, c.coverage_epsilon));
}

TEST(RunEpisode, PolicyEpisodeLogsHorizons) {
  PolicyConfig pc;
  pc.hidden = 32;
  pc.hidden_layers = 1;
  pc.diffusion_steps = 10;
  ActionNormalizer norm;
  norm.min.head<3>().setConstant(-0.35);
  norm.max.head<3>().setConstant(0.35);
  const PolicyCheckpoint policy(pc, GridSpec{}.workspace(), norm);
  for (PolicyKind kind : {PolicyKind::kScanDP, PolicyKind::kScanDPNoOpt}) {
    ScenarioConfig c = quick_config(kind, 30);
    EpisodeInputs in;
    in.policy = &policy;
    const RunRecord a = run_episode(c, in);
    const RunRecord b = run_episode(c, in);
    EXPECT_EQ(a.coverage_final, b.coverage_final);
    EXPECT_EQ(a.steps, 30);
    ASSERT_FALSE(a.horizons.empty());
    for (const HorizonLog& h : a.horizons) {
      EXPECT_EQ(h.sampled, pc.horizon);
      EXPECT_LE(h.kept, h.sampled);
      EXPECT_LE(h.optimized, h.kept);
      if (kind == PolicyKind::kScanDP && !h.empty) EXPECT_LE(h.loss, c.optimizer.eta + 1e-12);
    }
  }
  EXPECT_THROW(run_episode(quick_config(PolicyKind::kScanDP, 5)), ConfigError);
}

TEST(Suite, RowsFilesAndDeterminism) {
  const auto dir = temp_dir("suite");
  SuiteEntry e;
  e.config = quick_config(PolicyKind::kUniformHemisphere, 15);
  e.init_pose_ids = {0, 1, 2};
  const SuiteResult a = run_suite({e}, dir, 1);
  ASSERT_EQ(a.records.size(), 3u);
  EXPECT_TRUE(a.failures.empty());
  std::ifstream csv(dir / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kCsvHeader);
  int rows = 0;
  while (std::getline(csv, line)) rows += !line.empty();
  EXPECT_EQ(rows, 3);
  for (const RunRecord& r : a.records) {
    EXPECT_GE(r.coverage_final, 0.0);
    EXPECT_LE(r.coverage_final, 1.0);
    for (const char* ext : {".json", ".ply", ".ogm"}) EXPECT_TRUE(std::filesystem::exists(dir / (run_name(r) + ext)));
  }
  const SuiteResult b = run_suite({e}, temp_dir("suite2"), 2);
  ASSERT_EQ(b.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.records[i].init_pose_id, b.records[i].init_pose_id);
    EXPECT_EQ(a.records[i].coverage_final, b.records[i].coverage_final);
    EXPECT_EQ(a.records[i].path_length, b.records[i].path_length);
  }
}

TEST(Suite, ParsesJsonAndRejectsBadFields) {
  const auto entries = suite_from_json(nlohmann::json::parse(
      R"({"scenarios": [{"mesh": "cube", "policy": "random", "steps": 50, "seeds": [1, 2], "init_pose_ids": [0]}]})"));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].config.mesh, "cube");
  EXPECT_EQ(entries[0].config.policy, PolicyKind::kRandom);
  EXPECT_EQ(entries[0].seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_THROW(suite_from_json(nlohmann::json::parse(R"([{"steps": 0}])")), ConfigError);
  EXPECT_THROW(suite_from_json(nlohmann::json::parse(R"([{"policy": "teleport"}])")), ConfigError);
  EXPECT_THROW(suite_from_json(nlohmann::json::parse(R"([{"steps": "many"}])")), ConfigError);
  EXPECT_THROW(suite_from_json(nlohmann::json::parse(R"([{"seeds": []}])")), ConfigError);
}

TEST(Serialization, ScenarioAndRecordRoundTrip) {
  ScenarioConfig c = quick_config(PolicyKind::kRandomHemisphere, 12);
  c.noise_std = 0.05;
  c.initial_pose = look_at(Vec3(0.3, 0.1, 0.2), Vec3::Zero());
  const ScenarioConfig c2 = scenario_from_json(scenario_to_json(c));
  EXPECT_EQ(scenario_to_json(c2), scenario_to_json(c));

  const RunRecord r = run_episode(c);
  const RunRecord r2 = record_from_json(nlohmann::json::parse(record_to_json(r).dump()));
  auto without_poses = [](const RunRecord& rec) {
    auto j = record_to_json(rec);
    j.erase("poses");
    return j;
  };
  EXPECT_EQ(without_poses(r2), without_poses(r));
  ASSERT_EQ(r2.poses.size(), r.poses.size());
  for (std::size_t i = 0; i < r.poses.size(); ++i) {
    EXPECT_EQ(r2.poses[i].translation, r.poses[i].translation);
    EXPECT_LT(r2.poses[i].rotation.angularDistance(r.poses[i].rotation), 1e-12);
  }
  EXPECT_EQ(csv_row(r2), csv_row(r));
  const std::string row = csv_row(r);
  const std::string header = kCsvHeader;
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
}
