// Command-line front end: demonstrations, training, episodes, suites and
// exports. Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "scandp/expert.hpp"
#include "scandp/harness.hpp"
#include "scandp/policy.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace scandp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

PolicyConfig policy_config_from_json(const json& j) {
  PolicyConfig c;
  try {
    read_opt(j, "horizon", c.horizon);
    read_opt(j, "history", c.history);
    read_opt(j, "diffusion_steps", c.diffusion_steps);
    read_opt(j, "beta_start", c.beta_start);
    read_opt(j, "beta_end", c.beta_end);
    read_opt(j, "hidden", c.hidden);
    read_opt(j, "hidden_layers", c.hidden_layers);
    read_opt(j, "time_dim", c.time_dim);
    read_opt(j, "data_scale", c.data_scale);
    read_opt(j, "init_seed", c.init_seed);
    if (j.contains("ogm_mode")) {
      const std::string mode = j.at("ogm_mode");
      if (mode == "raw") {
        c.ogm_mode = OgmFeatureMode::kRaw;
      } else if (mode == "thresholded") {
        c.ogm_mode = OgmFeatureMode::kThresholded;
      } else {
        throw ConfigError("unknown ogm_mode '" + mode + "'");
      }
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      read_opt(t, "steps", c.training.steps);
      read_opt(t, "batch", c.training.batch);
      read_opt(t, "learning_rate", c.training.learning_rate);
      read_opt(t, "optimizer", c.training.optimizer);
      read_opt(t, "lr_schedule", c.training.lr_schedule);
      read_opt(t, "noise_draws", c.training.noise_draws);
      read_opt(t, "seed", c.training.seed);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad policy field: ") + e.what());
  }
  return c;
}

// Scenario fields that can be overridden from the command line.
struct ScenarioOverrides {
  std::string config;
  std::optional<std::string> mesh, policy, checkpoint;
  std::optional<double> scale, noise, fov;
  std::optional<int> steps, init_pose;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "scenario JSON file");
    cmd->add_option("--mesh", mesh, "mesh path or primitive (sphere, cube, lshape, blob, torus)");
    cmd->add_option("--policy", policy, "scandp | scandp-no-opt | random | random-hemisphere | uniform-hemisphere | expert-replay");
    cmd->add_option("--checkpoint", checkpoint, "policy checkpoint for scandp kinds");
    cmd->add_option("--scale", scale, "mesh scale factor");
    cmd->add_option("--noise", noise, "depth noise std (m)");
    cmd->add_option("--fov", fov, "horizontal and vertical field of view (deg)");
    cmd->add_option("--steps", steps, "step budget T");
    cmd->add_option("--init-pose", init_pose, "initial pose id");
    cmd->add_option("--seed", seed, "episode seed");
  }

  ScenarioConfig apply(json j) const {
    if (mesh) j["mesh"] = *mesh;
    if (policy) j["policy"] = *policy;
    if (checkpoint) j["checkpoint"] = *checkpoint;
    if (scale) j["scale"] = *scale;
    if (noise) j["noise_std"] = *noise;
    if (fov) j["camera"]["fov_x"] = j["camera"]["fov_y"] = *fov;
    if (steps) j["steps"] = *steps;
    if (init_pose) j["init_pose_id"] = *init_pose;
    if (seed) j["seed"] = *seed;
    return scenario_from_json(j);
  }

  ScenarioConfig load() const { return apply(config.empty() ? json::object() : read_json(config)); }
};

void write_record(const RunRecord& rec, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string name = run_name(rec);
  std::ofstream(dir / (name + ".json")) << record_to_json(rec).dump(2) << '\n';
  write_ply(rec.final_cloud, dir / (name + ".ply"));
  if (rec.grid) rec.grid->save((dir / (name + ".ogm")).string());
}

std::vector<RunRecord> load_records(const std::vector<std::string>& inputs) {
  std::vector<RunRecord> records;
  for (const std::string& in : inputs) {
    std::vector<fs::path> files;
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
    } else {
      files.emplace_back(in);
    }
    for (const fs::path& f : files) {
      try {
        records.push_back(record_from_json(read_json(f.string())));
      } catch (const json::exception& e) {
        throw ConfigError(f.string() + ": not a run record (" + e.what() + ")");
      }
    }
  }
  if (records.empty()) throw ConfigError("no run records found");
  return records;
}

void print_summary(const std::vector<RunRecord>& records, std::ostream& out) {
  struct Acc {
    std::vector<double> coverage, path;
  };
  std::map<std::string, Acc> groups;
  for (const RunRecord& r : records) {
    std::ostringstream key;
    key << r.policy << ',' << r.object << ',' << r.scale << ',' << r.noise_std << ',' << r.fov_x << 'x' << r.fov_y;
    groups[key.str()].coverage.push_back(r.coverage_final);
    groups[key.str()].path.push_back(r.path_length);
  }
  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, v.size() > 1 ? std::sqrt(s / double(v.size() - 1)) : 0.0};
  };
  out << "policy,object,scale,noise_std,fov,runs,coverage_mean,coverage_sd,path_length_mean,path_length_sd\n";
  for (const auto& [key, acc] : groups) {
    const auto [cm, cs] = mean_sd(acc.coverage);
    const auto [pm, ps] = mean_sd(acc.path);
    out << key << ',' << acc.coverage.size() << ',' << cm << ',' << cs << ',' << pm << ',' << ps << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale autonomous 3D scanning workbench"};
  app.require_subcommand(1);

  // demo
  auto* demo = app.add_subcommand("demo", "generate scripted expert demonstrations");
  std::string demo_mesh = "sphere", demo_out = "demos";
  double demo_scale = 1.0;
  int demo_count = 3, demo_steps = 200, demo_size = 224;
  std::uint64_t demo_seed = 0;
  demo->add_option("--mesh", demo_mesh, "mesh path or primitive");
  demo->add_option("--scale", demo_scale, "mesh scale factor");
  demo->add_option("--count", demo_count, "number of demonstrations")->check(CLI::PositiveNumber);
  demo->add_option("--steps", demo_steps, "poses per demonstration")->check(CLI::PositiveNumber);
  demo->add_option("--seed", demo_seed, "seed of the first demonstration");
  demo->add_option("--image-size", demo_size, "depth image width and height")->check(CLI::PositiveNumber);
  demo->add_option("-o,--out", demo_out, "output directory");

  // train
  auto* train = app.add_subcommand("train", "train the diffusion policy on demonstrations");
  std::vector<std::string> train_demos;
  std::string train_config, train_out = "policy.sdp";
  std::optional<int> train_steps;
  std::optional<std::uint64_t> train_seed;
  int train_size = 224;
  train->add_option("demos", train_demos, "demonstration directories")->required();
  train->add_option("-c,--config", train_config, "policy JSON file");
  train->add_option("--steps", train_steps, "training steps");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--image-size", train_size, "depth image width and height used by the demos");
  train->add_option("-o,--out", train_out, "checkpoint path");

  // run
  auto* run = app.add_subcommand("run", "run one scanning episode");
  ScenarioOverrides run_opts;
  run_opts.add(run);
  std::string run_out;
  run->add_option("-o,--out", run_out, "directory for the record, PLY and grid dump");

  // suite
  auto* suite = app.add_subcommand("suite", "run a batch of episodes");
  std::string suite_config, suite_out = "results", suite_checkpoint;
  int suite_threads = 0;
  suite->add_option("-c,--config", suite_config, "suite JSON file")->required();
  suite->add_option("-o,--out", suite_out, "output directory");
  suite->add_option("--threads", suite_threads, "worker threads (0: hardware concurrency)");
  suite->add_option("--checkpoint", suite_checkpoint, "policy checkpoint shared by all scandp scenarios");

  // eval
  auto* eval = app.add_subcommand("eval", "summarise stored run records");
  std::vector<std::string> eval_inputs;
  eval->add_option("records", eval_inputs, "record JSON files or directories")->required();

  // export
  auto* exp = app.add_subcommand("export", "export records as CSV, or a grid dump as a PLY of occupied cells");
  std::vector<std::string> export_inputs;
  std::string export_csv, export_ogm, export_ply;
  double export_kappa = 0.9;
  exp->add_option("records", export_inputs, "record JSON files or directories");
  exp->add_option("--csv", export_csv, "CSV output path");
  exp->add_option("--ogm", export_ogm, "grid dump to convert");
  exp->add_option("--ply", export_ply, "PLY output path for --ogm");
  exp->add_option("--kappa", export_kappa, "occupancy threshold for --ogm");

  // mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "write a built-in primitive as OBJ");
  std::string mesh_name, mesh_out;
  mesh_cmd->add_option("name", mesh_name, "primitive name")->required();
  mesh_cmd->add_option("-o,--out", mesh_out, "OBJ path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*demo) {
      const TriangleMesh mesh = scenario_mesh([&] {
        ScenarioConfig c;
        c.mesh = demo_mesh;
        c.scale = demo_scale;
        return c;
      }());
      CameraModel cam;
      cam.width = cam.height = demo_size;
      ExpertConfig ec;
      ec.steps = demo_steps;
      for (int n = 0; n < demo_count; ++n) {
        const std::uint64_t seed = demo_seed + static_cast<std::uint64_t>(n);
        const Demonstration d = generate_expert_demo(mesh, cam, seed, ec, fs::path(demo_mesh).stem().string());
        const fs::path dir = fs::path(demo_out) / ("demo_" + std::to_string(seed));
        save_demo(d, dir);
        std::cout << dir.string() << '\n';
      }
    } else if (*train) {
      PolicyConfig pc = train_config.empty() ? PolicyConfig{} : policy_config_from_json(read_json(train_config));
      if (train_steps) pc.training.steps = *train_steps;
      if (train_seed) pc.training.seed = *train_seed;
      std::vector<Demonstration> demos;
      for (const std::string& d : train_demos) demos.push_back(load_demo(d));
      CameraModel cam;
      cam.width = cam.height = train_size;
      const Dataset data = build_dataset(demos, cam, GridSpec{}, pc.horizon, pc.history);
      PolicyCheckpoint policy(pc, data.workspace, data.normalizer);
      std::cerr << data.samples.size() << " samples, " << policy.parameter_count() << " parameters\n";
      const TrainingReport report = train_policy(policy, data, &std::cerr);
      policy.save(train_out);
      std::cout << "saved " << train_out << " after " << report.losses.size() << " steps (" << report.seconds
                << " s, final loss " << (report.losses.empty() ? 0.0 : report.losses.back()) << ")\n";
    } else if (*run) {
      const ScenarioConfig config = run_opts.load();
      const RunRecord rec = run_episode(config);
      for (const std::string& w : rec.warnings) std::cerr << "warning: " << w << '\n';
      if (!run_out.empty()) write_record(rec, run_out);
      std::cout << kCsvHeader << '\n' << csv_row(rec) << '\n';
    } else if (*suite) {
      const auto entries = suite_from_json(read_json(suite_config));
      std::optional<PolicyCheckpoint> policy;
      if (!suite_checkpoint.empty()) policy = PolicyCheckpoint::load(suite_checkpoint);
      const SuiteResult result = run_suite(entries, suite_out, suite_threads, policy ? &*policy : nullptr);
      for (const std::string& f : result.failures) std::cerr << "failed: " << f << '\n';
      std::cout << result.records.size() << " runs written to " << suite_out << '\n';
      if (!result.failures.empty()) return 2;
    } else if (*eval) {
      print_summary(load_records(eval_inputs), std::cout);
    } else if (*exp) {
      if (!export_ogm.empty()) {
        if (export_ply.empty()) throw ConfigError("--ogm needs --ply");
        const OccupancyGrid grid = OccupancyGrid::load(export_ogm);
        PointCloud centers;
        for (const CellIndex& c : grid.occupied_cells(export_kappa)) centers.points.push_back(grid.cell_center(c));
        write_ply(centers, export_ply);
        std::cout << centers.size() << " occupied cells written to " << export_ply << '\n';
      }
      if (!export_inputs.empty()) {
        std::ofstream file;
        if (!export_csv.empty()) {
          file.open(export_csv);
          if (!file) throw std::runtime_error("cannot write " + export_csv);
        }
        std::ostream& out = export_csv.empty() ? std::cout : file;
        out << kCsvHeader << '\n';
        for (const RunRecord& r : load_records(export_inputs)) out << csv_row(r) << '\n';
      }
      if (export_ogm.empty() && export_inputs.empty()) throw ConfigError("export needs records or --ogm");
    } else if (*mesh_cmd) {
      write_obj(make_primitive(mesh_name), mesh_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const MeshError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
