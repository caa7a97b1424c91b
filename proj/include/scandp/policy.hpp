#pragma once

#include "scandp/diffusion.hpp"
#include "scandp/encoder.hpp"
#include "scandp/geometry.hpp"
#include "scandp/occupancy_grid.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace scandp {

using Real = double;
using MatrixR = nn::Matrix<Real>;
using VectorR = nn::Vector<Real>;

struct TrainingConfig {
  int steps = 20000;
  int batch = 32;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // "sgd" or "adam"
  std::string lr_schedule = "cosine";  // decay to zero over `steps`, or "constant"
  int noise_draws = 8;  // (k, eps) draws per encoded sample in a batch
  std::uint64_t seed = 1;
};

struct PolicyConfig {
  int horizon = 16;  // N
  int history = 2;   // h
  int diffusion_steps = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  int hidden = 256;
  int hidden_layers = 3;
  int time_dim = 32;
  double data_scale = 0.05;  // noise-predictor preconditioning; <= 0 disables it
  OgmFeatureMode ogm_mode = OgmFeatureMode::kRaw;
  std::uint64_t init_seed = 0;
  TrainingConfig training;
};

/// Per-dimension min-max map of the 9 pose parameters to [-1, 1].
struct ActionNormalizer {
  Eigen::Matrix<double, 9, 1> min = Eigen::Matrix<double, 9, 1>::Constant(-1.0);
  Eigen::Matrix<double, 9, 1> max = Eigen::Matrix<double, 9, 1>::Constant(1.0);

  /// Ranges narrower than `min_range` are widened symmetrically.
  static ActionNormalizer fit(const std::vector<Pose>& poses, double min_range = 1e-3);

  Eigen::Matrix<double, 9, 1> normalize(const Eigen::Matrix<double, 9, 1>& v) const {
    return (2.0 * (v - min).array() / (max - min).array() - 1.0).matrix();
  }
  Eigen::Matrix<double, 9, 1> denormalize(const Eigen::Matrix<double, 9, 1>& v) const {
    return (min.array() + 0.5 * (v.array() + 1.0) * (max - min).array()).matrix();
  }
};

/// One sliding-window training example.
struct TrainingSample {
  std::size_t snapshot = 0;  // index into Dataset::snapshots
  std::vector<Pose> history;
  PoseHorizon target;
};

struct Dataset {
  std::vector<GridSnapshot> snapshots;
  std::vector<TrainingSample> samples;
  ActionNormalizer normalizer;
  Workspace workspace;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to run or resume the policy: both encoders, the noise
/// predictor, the schedule, action normalisation and optimizer state.
class PolicyCheckpoint {
 public:
  PolicyCheckpoint() = default;
  PolicyCheckpoint(const PolicyConfig& config, const Workspace& workspace, const ActionNormalizer& normalizer);

  const PolicyConfig& config() const { return config_; }
  PolicyConfig& config() { return config_; }
  const Workspace& workspace() const { return workspace_; }
  const DiffusionSchedule& schedule() const { return schedule_; }
  const ActionNormalizer& normalizer() const { return normalizer_; }
  int action_dim() const { return config_.horizon * kPoseParamDim; }

  GridEncoder<Real>& grid_encoder() { return grid_encoder_; }
  const GridEncoder<Real>& grid_encoder() const { return grid_encoder_; }
  PoseEncoder<Real>& pose_encoder() { return pose_encoder_; }
  const PoseEncoder<Real>& pose_encoder() const { return pose_encoder_; }
  NoisePredictor<Real>& noise_predictor() { return noise_predictor_; }
  const NoisePredictor<Real>& noise_predictor() const { return noise_predictor_; }
  nn::Optimizer<Real>& optimizer() { return optimizer_; }

  void zero_grad();
  /// Visits every trainable tensor in a fixed order.
  void visit(const nn::ParamVisitor<Real>& f);
  std::size_t parameter_count();

  /// Normalised action column (horizon * 9) for a pose horizon.
  VectorR encode_actions(const PoseHorizon& horizon) const;
  PoseHorizon decode_actions(const VectorR& actions) const;

  void save(const std::filesystem::path& path);
  static PolicyCheckpoint load(const std::filesystem::path& path);

 private:
  PolicyConfig config_;
  Workspace workspace_;
  ActionNormalizer normalizer_;
  DiffusionSchedule schedule_;
  GridEncoder<Real> grid_encoder_;
  PoseEncoder<Real> pose_encoder_;
  NoisePredictor<Real> noise_predictor_;
  nn::Optimizer<Real> optimizer_;
};

/// e = e_cam (+) e_ogm for the current grid and pose history.
VectorR policy_condition(const PolicyCheckpoint& policy, const SparseTensor<Real>& grid, std::span<const Pose> history);

/// Explicit inputs for one loss evaluation.
struct LossInputs {
  std::vector<const TrainingSample*> samples;
  std::vector<int> steps;  // diffusion step per sample
  MatrixR noise;           // action_dim x batch
};

/// Mean squared error between `noise` and eps_theta(forward_diffuse(a0, k, noise), k, e).
/// With `backprop`, gradients of every trainable tensor are accumulated.
double diffusion_loss(PolicyCheckpoint& policy, const Dataset& data, const LossInputs& in, bool backprop);

/// Samples k and eps for the given batch (`noise_draws` times per sample),
/// evaluates the loss, applies one optimizer update and returns the
/// pre-update loss.
double train_step(PolicyCheckpoint& policy, const Dataset& data, const std::vector<std::size_t>& batch,
                  std::mt19937_64& rng, int noise_draws = 1);

struct TrainingReport {
  std::vector<double> losses;
  double seconds = 0.0;
};

/// Runs `config().training.steps` minibatch steps over the dataset.
TrainingReport train_policy(PolicyCheckpoint& policy, const Dataset& data, std::ostream* log = nullptr);

/// Reverse diffusion from a standard-normal draw, denormalised to poses
/// with re-orthonormalised rotations.
PoseHorizon sample_actions(const PolicyCheckpoint& policy, const VectorR& condition, std::mt19937_64& rng);

}  // namespace scandp
