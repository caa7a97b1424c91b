#include "scandp/policy.hpp"

#include <json.hpp>

#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>

namespace scandp {

using json = nlohmann::json;

ActionNormalizer ActionNormalizer::fit(const std::vector<Pose>& poses, double min_range) {
  if (poses.empty()) throw TrainingError("cannot fit action normalisation on an empty set");
  ActionNormalizer n;
  n.min.setConstant(std::numeric_limits<double>::infinity());
  n.max.setConstant(-std::numeric_limits<double>::infinity());
  for (const Pose& p : poses) {
    const auto v = pose_to_vector(p);
    n.min = n.min.cwiseMin(v);
    n.max = n.max.cwiseMax(v);
  }
  for (int d = 0; d < 9; ++d) {
    const double range = n.max[d] - n.min[d];
    if (range < min_range) {
      const double mid = 0.5 * (n.max[d] + n.min[d]);
      n.min[d] = mid - 0.5 * min_range;
      n.max[d] = mid + 0.5 * min_range;
    }
  }
  return n;
}

PolicyCheckpoint::PolicyCheckpoint(const PolicyConfig& config, const Workspace& workspace,
                                   const ActionNormalizer& normalizer)
    : config_(config),
      workspace_(workspace),
      normalizer_(normalizer),
      schedule_(make_schedule(config.diffusion_steps, config.beta_start, config.beta_end)),
      pose_encoder_(config.history),
      noise_predictor_(config.horizon * kPoseParamDim, kConditionDim, config.hidden, config.hidden_layers,
                       config.time_dim) {
  if (config.horizon < 1 || config.history < 1) throw TrainingError("horizon and history must be >= 1");
  noise_predictor_.precondition(schedule_, config.data_scale);
  std::mt19937_64 rng(config.init_seed);
  grid_encoder_.init_uniform(rng);
  pose_encoder_.init_uniform(rng);
  noise_predictor_.init_uniform(rng);
  const auto kind = config.training.optimizer == "adam" ? nn::Optimizer<Real>::Kind::kAdam
                                                        : nn::Optimizer<Real>::Kind::kSgd;
  if (config.training.optimizer != "adam" && config.training.optimizer != "sgd") {
    throw TrainingError("unknown optimizer '" + config.training.optimizer + "'");
  }
  optimizer_ = nn::Optimizer<Real>(kind, config.training.learning_rate);
}

void PolicyCheckpoint::zero_grad() {
  grid_encoder_.zero_grad();
  pose_encoder_.zero_grad();
  noise_predictor_.zero_grad();
}

void PolicyCheckpoint::visit(const nn::ParamVisitor<Real>& f) {
  grid_encoder_.visit("grid_encoder", f);
  pose_encoder_.visit("pose_encoder", f);
  noise_predictor_.visit("noise_predictor", f);
}

std::size_t PolicyCheckpoint::parameter_count() {
  std::size_t n = 0;
  visit([&](const std::string&, MatrixR& v, MatrixR&) { n += static_cast<std::size_t>(v.size()); });
  return n;
}

VectorR PolicyCheckpoint::encode_actions(const PoseHorizon& horizon) const {
  if (static_cast<int>(horizon.size()) != config_.horizon) throw TrainingError("action horizon length mismatch");
  VectorR a(action_dim());
  for (int i = 0; i < config_.horizon; ++i) {
    a.segment<kPoseParamDim>(i * kPoseParamDim) = normalizer_.normalize(pose_to_vector(horizon[i]));
  }
  return a;
}

PoseHorizon PolicyCheckpoint::decode_actions(const VectorR& actions) const {
  PoseHorizon out;
  out.reserve(config_.horizon);
  for (int i = 0; i < config_.horizon; ++i) {
    out.push_back(pose_from_vector(normalizer_.denormalize(actions.segment<kPoseParamDim>(i * kPoseParamDim))));
  }
  return out;
}

VectorR policy_condition(const PolicyCheckpoint& policy, const SparseTensor<Real>& grid, std::span<const Pose> history) {
  const VectorR e_ogm = policy.grid_encoder().forward(grid);
  const VectorR e_cam = encode_pose_history(policy.pose_encoder(), history, policy.workspace());
  return condition(e_cam, e_ogm);
}

double diffusion_loss(PolicyCheckpoint& policy, const Dataset& data, const LossInputs& in, bool backprop) {
  const auto batch = static_cast<Eigen::Index>(in.samples.size());
  if (batch == 0) throw TrainingError("empty batch");
  if (static_cast<Eigen::Index>(in.steps.size()) != batch || in.noise.cols() != batch ||
      in.noise.rows() != policy.action_dim()) {
    throw TrainingError("loss inputs have inconsistent shapes");
  }
  const int history = policy.config().history;
  const auto mode = policy.config().ogm_mode;

  // Each distinct sample is encoded once; columns refer to it by slot.
  std::vector<const TrainingSample*> unique;
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto it = std::find(unique.begin(), unique.end(), in.samples[b]);
    slot[b] = it - unique.begin();
    if (it == unique.end()) unique.push_back(in.samples[b]);
  }
  const auto distinct = static_cast<Eigen::Index>(unique.size());

  std::vector<GridEncoder<Real>::Cache> grid_caches(unique.size());
  MatrixR e_ogm(kGridFeatureDim, distinct);
  MatrixR pose_in(history * kPoseParamDim, distinct);
  for (Eigen::Index u = 0; u < distinct; ++u) {
    const TrainingSample& s = *unique[u];
    const auto tensor = grid_to_sparse<Real>(data.snapshots.at(s.snapshot), mode);
    e_ogm.col(u) = policy.grid_encoder().forward(tensor, &grid_caches[u]);
    pose_in.col(u) = pose_history_input<Real>(s.history, history, policy.workspace());
  }
  nn::Mlp<Real>::Cache pose_cache;
  const MatrixR e_cam = policy.pose_encoder().forward(pose_in, &pose_cache);

  MatrixR cond(kConditionDim, batch);
  MatrixR noisy(policy.action_dim(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int k = in.steps[b];
    if (k < 1 || k > policy.schedule().steps) throw TrainingError("diffusion step out of range");
    cond.col(b).head(kPoseFeatureDim) = e_cam.col(slot[b]);
    cond.col(b).tail(kGridFeatureDim) = e_ogm.col(slot[b]);
    noisy.col(b) = policy.schedule().signal[k] * policy.encode_actions(in.samples[b]->target) +
                   policy.schedule().noise[k] * in.noise.col(b);
  }

  NoisePredictor<Real>::Cache eps_cache;
  const MatrixR pred = policy.noise_predictor().forward(noisy, in.steps, cond, &eps_cache);
  const MatrixR diff = pred - in.noise;
  const double loss = diff.squaredNorm() / double(diff.size());
  if (!std::isfinite(loss)) throw TrainingError("non-finite loss (NaN or Inf); check learning rate and data");
  if (!backprop) return loss;

  const MatrixR grad_pred = diff * (2.0 / double(diff.size()));
  const MatrixR grad_cond = policy.noise_predictor().backward(eps_cache, grad_pred);
  MatrixR grad_cam = MatrixR::Zero(kPoseFeatureDim, distinct);
  MatrixR grad_ogm = MatrixR::Zero(kGridFeatureDim, distinct);
  for (Eigen::Index b = 0; b < batch; ++b) {
    grad_cam.col(slot[b]) += grad_cond.col(b).head(kPoseFeatureDim);
    grad_ogm.col(slot[b]) += grad_cond.col(b).tail(kGridFeatureDim);
  }
  policy.pose_encoder().backward(pose_cache, grad_cam);
  for (Eigen::Index u = 0; u < distinct; ++u) policy.grid_encoder().backward(grid_caches[u], grad_ogm.col(u));
  return loss;
}

double train_step(PolicyCheckpoint& policy, const Dataset& data, const std::vector<std::size_t>& batch,
                  std::mt19937_64& rng, int noise_draws) {
  if (batch.empty()) throw TrainingError("empty batch");
  if (noise_draws < 1) throw TrainingError("noise_draws must be >= 1");
  LossInputs in;
  const auto columns = static_cast<Eigen::Index>(batch.size()) * noise_draws;
  in.noise.resize(policy.action_dim(), columns);
  std::uniform_int_distribution<int> pick_step(1, policy.schedule().steps);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (int r = 0; r < noise_draws; ++r) {
      in.samples.push_back(&data.samples.at(batch[b]));
      in.steps.push_back(pick_step(rng));
    }
  }
  for (Eigen::Index c = 0; c < columns; ++c) {
    for (Eigen::Index r = 0; r < in.noise.rows(); ++r) in.noise(r, c) = gauss(rng);
  }
  policy.zero_grad();
  const double loss = diffusion_loss(policy, data, in, true);
  auto& opt = policy.optimizer();
  opt.begin_step();
  policy.visit(opt.updater());
  return loss;
}

TrainingReport train_policy(PolicyCheckpoint& policy, const Dataset& data, std::ostream* log) {
  if (data.samples.empty()) throw TrainingError("dataset has no samples");
  const auto& cfg = policy.config().training;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.samples.size() - 1);
  TrainingReport report;
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch));
  if (cfg.lr_schedule != "constant" && cfg.lr_schedule != "cosine") {
    throw TrainingError("unknown learning-rate schedule '" + cfg.lr_schedule + "'");
  }
  const bool cosine = cfg.lr_schedule == "cosine";
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& b : batch) b = pick(rng);
    if (cosine) policy.optimizer().set_learning_rate(0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * step / cfg.steps)));
    report.losses.push_back(train_step(policy, data, batch, rng, cfg.noise_draws));
    if (log && (step % 100 == 0 || step + 1 == cfg.steps)) {
      const std::size_t from = report.losses.size() >= 100 ? report.losses.size() - 100 : 0;
      const double avg = std::accumulate(report.losses.begin() + static_cast<long>(from), report.losses.end(), 0.0) /
                         double(report.losses.size() - from);
      *log << "step " << step << " loss " << avg << '\n';
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

PoseHorizon sample_actions(const PolicyCheckpoint& policy, const VectorR& condition, std::mt19937_64& rng) {
  if (condition.size() != kConditionDim) throw std::invalid_argument("sample_actions: condition must have 96 entries");
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixR a(policy.action_dim(), 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = gauss(rng);
  const MatrixR cond = condition;
  const MatrixR a0 = reverse_diffusion(
      policy.schedule(), a,
      [&](const MatrixR& ak, int k) { return policy.noise_predictor().forward(ak, {k}, cond); }, rng);
  return policy.decode_actions(a0.col(0));
}

// ---------------------------------------------------------------------------
// Checkpoint file: "SDP1", u64 header length, JSON header, then one blob per
// tensor: u32 name length, name, u32 rank (2), u32 rows, u32 cols, row-major
// little-endian f32 values.

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host expected");

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw TrainingError("checkpoint truncated");
  return v;
}

json vec9(const Eigen::Matrix<double, 9, 1>& v) { return std::vector<double>(v.data(), v.data() + 9); }

Eigen::Matrix<double, 9, 1> vec9(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 9) throw TrainingError("checkpoint: normaliser must have 9 entries");
  return Eigen::Map<const Eigen::Matrix<double, 9, 1>>(v.data());
}

}  // namespace

void PolicyCheckpoint::save(const std::filesystem::path& path) {
  json header;
  header["format"] = "SDP1";
  header["config"] = {{"horizon", config_.horizon},
                      {"history", config_.history},
                      {"diffusion_steps", config_.diffusion_steps},
                      {"beta_start", config_.beta_start},
                      {"beta_end", config_.beta_end},
                      {"hidden", config_.hidden},
                      {"hidden_layers", config_.hidden_layers},
                      {"time_dim", config_.time_dim},
                      {"data_scale", config_.data_scale},
                      {"ogm_mode", config_.ogm_mode == OgmFeatureMode::kRaw ? "raw" : "thresholded"},
                      {"init_seed", config_.init_seed},
                      {"training",
                       {{"steps", config_.training.steps},
                        {"batch", config_.training.batch},
                        {"learning_rate", config_.training.learning_rate},
                        {"optimizer", config_.training.optimizer},
                        {"lr_schedule", config_.training.lr_schedule},
                        {"noise_draws", config_.training.noise_draws},
                        {"seed", config_.training.seed}}}};
  header["workspace"] = {{"center", {workspace_.center.x(), workspace_.center.y(), workspace_.center.z()}},
                         {"extent", workspace_.extent}};
  header["normalizer"] = {{"min", vec9(normalizer_.min)}, {"max", vec9(normalizer_.max)}};
  json blobs = json::array();
  visit([&](const std::string& name, MatrixR& v, MatrixR&) {
    blobs.push_back({{"name", name}, {"shape", {v.rows(), v.cols()}}});
  });
  header["blobs"] = blobs;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw TrainingError("cannot write checkpoint " + path.string());
  const std::string text = header.dump();
  out.write("SDP1", 4);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  visit([&](const std::string& name, MatrixR& v, MatrixR&) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(out, 2);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.rows()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.cols()));
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) write_pod<float>(out, static_cast<float>(v(r, c)));
    }
  });
  if (!out) throw TrainingError("failed writing checkpoint " + path.string());
}

PolicyCheckpoint PolicyCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainingError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SDP1", 4) != 0) throw TrainingError("not an SDP1 checkpoint");
  const auto len = read_pod<std::uint64_t>(in);
  if (len > (1u << 26)) throw TrainingError("checkpoint header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw TrainingError("checkpoint truncated");
  const json header = json::parse(text);

  PolicyConfig cfg;
  const auto& c = header.at("config");
  cfg.horizon = c.at("horizon");
  cfg.history = c.at("history");
  cfg.diffusion_steps = c.at("diffusion_steps");
  cfg.beta_start = c.at("beta_start");
  cfg.beta_end = c.at("beta_end");
  cfg.hidden = c.at("hidden");
  cfg.hidden_layers = c.at("hidden_layers");
  cfg.time_dim = c.at("time_dim");
  cfg.data_scale = c.at("data_scale");
  cfg.ogm_mode = c.at("ogm_mode") == "raw" ? OgmFeatureMode::kRaw : OgmFeatureMode::kThresholded;
  cfg.init_seed = c.at("init_seed");
  const auto& t = c.at("training");
  cfg.training.steps = t.at("steps");
  cfg.training.batch = t.at("batch");
  cfg.training.learning_rate = t.at("learning_rate");
  cfg.training.optimizer = t.at("optimizer");
  cfg.training.lr_schedule = t.at("lr_schedule");
  cfg.training.noise_draws = t.at("noise_draws");
  cfg.training.seed = t.at("seed");

  Workspace ws;
  const auto center = header.at("workspace").at("center").get<std::vector<double>>();
  if (center.size() != 3) throw TrainingError("checkpoint: workspace center must have 3 entries");
  ws.center = Vec3(center[0], center[1], center[2]);
  ws.extent = header.at("workspace").at("extent");
  ActionNormalizer norm;
  norm.min = vec9(header.at("normalizer").at("min"));
  norm.max = vec9(header.at("normalizer").at("max"));
  if (((norm.max - norm.min).array() <= 0.0).any()) throw TrainingError("checkpoint: degenerate normaliser range");

  PolicyCheckpoint policy(cfg, ws, norm);
  policy.visit([&](const std::string& name, MatrixR& v, MatrixR&) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string stored(name_len, '\0');
    if (!in.read(stored.data(), name_len)) throw TrainingError("checkpoint truncated");
    if (stored != name) throw TrainingError("checkpoint blob '" + stored + "' where '" + name + "' expected");
    const auto rank = read_pod<std::uint32_t>(in);
    const auto rows = read_pod<std::uint32_t>(in);
    const auto cols = read_pod<std::uint32_t>(in);
    if (rank != 2 || rows != v.rows() || cols != v.cols()) throw TrainingError("checkpoint blob '" + name + "' shape mismatch");
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index col = 0; col < v.cols(); ++col) v(r, col) = read_pod<float>(in);
    }
    if (!v.allFinite()) throw TrainingError("checkpoint blob '" + name + "' has non-finite values");
  });
  return policy;
}

}  // namespace scandp
