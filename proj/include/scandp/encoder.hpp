#pragma once

#include "scandp/geometry.hpp"
#include "scandp/nn.hpp"
#include "scandp/occupancy_grid.hpp"
#include "scandp/sparse_conv.hpp"

#include <array>
#include <span>
#include <vector>

namespace scandp {

inline constexpr int kGridFeatureDim = 64;
inline constexpr int kPoseFeatureDim = 32;
inline constexpr int kConditionDim = kGridFeatureDim + kPoseFeatureDim;
inline constexpr int kPoseParamDim = 9;

/// Occupancy features handed to the encoder.
enum class OgmFeatureMode {
  kRaw,          // occupancy probability of every non-prior cell
  kThresholded,  // 1 occupied (p >= 0.9), 0 free (p < 0.5), 0.5 otherwise
};

inline double threshold_probability(double p) {
  if (p >= 0.9) return 1.0;
  if (p < 0.5) return 0.0;
  return 0.5;
}

/// One coordinate per cell with nonzero log-odds, lexicographic order.
template <typename Scalar = double>
SparseTensor<Scalar> grid_to_sparse(const OccupancyGrid& grid, OgmFeatureMode mode = OgmFeatureMode::kRaw) {
  const auto cells = grid.sorted_cells();
  SparseTensor<Scalar> t;
  t.coords.reserve(cells.size());
  t.features.resize(1, static_cast<Eigen::Index>(cells.size()));
  for (std::size_t n = 0; n < cells.size(); ++n) {
    t.coords.push_back(cells[n].first);
    const double p = log_odds::probability(log_odds::to_value(cells[n].second));
    t.features(0, static_cast<Eigen::Index>(n)) = Scalar(mode == OgmFeatureMode::kRaw ? p : threshold_probability(p));
  }
  return t;
}

template <typename Scalar = double>
SparseTensor<Scalar> grid_to_sparse(const GridSnapshot& snap, OgmFeatureMode mode = OgmFeatureMode::kRaw) {
  SparseTensor<Scalar> t;
  std::size_t active = 0;
  for (const auto q : snap.quanta) active += q != 0;
  t.coords.reserve(active);
  t.features.resize(1, static_cast<Eigen::Index>(active));
  // Linear order is k-major; iterate i, j, k so the output stays lexicographic.
  Eigen::Index n = 0;
  for (int i = 0; i < snap.dim; ++i) {
    for (int j = 0; j < snap.dim; ++j) {
      for (int k = 0; k < snap.dim; ++k) {
        const int q = snap.at(i, j, k);
        if (q == 0) continue;
        t.coords.push_back({i, j, k});
        const double p = log_odds::probability(log_odds::to_value(q));
        t.features(0, n++) = Scalar(mode == OgmFeatureMode::kRaw ? p : threshold_probability(p));
      }
    }
  }
  return t;
}

/// Three stride-2 sparse conv layers (1 -> 16 -> 32 -> 64, ReLU), global
/// average pooling over the coarsest active sites, then a linear layer to 64.
template <typename Scalar>
class GridEncoder {
 public:
  static constexpr std::array<int, 4> kChannels = {1, 16, 32, 64};

  struct Cache {
    std::array<Rulebook, 3> books;
    std::array<nn::Matrix<Scalar>, 3> inputs;
    std::array<nn::Matrix<Scalar>, 3> pre;
    nn::Matrix<Scalar> pooled;  // 64 x 1
    Eigen::Index pooled_sites = 0;
  };

  GridEncoder() {
    for (int l = 0; l < 3; ++l) convs_[l] = SparseConv3d<Scalar>(kChannels[l], kChannels[l + 1]);
    fc_ = nn::Linear<Scalar>(kChannels[3], kGridFeatureDim);
  }

  template <typename Rng>
  void init_uniform(Rng& rng) {
    for (auto& c : convs_) c.init_uniform(rng);
    fc_.init_uniform(rng);
  }

  nn::Vector<Scalar> forward(const SparseTensor<Scalar>& input, Cache* cache = nullptr) const {
    if (input.size() > 0 && input.channels() != kChannels[0]) {
      throw std::invalid_argument("GridEncoder: expected one input channel");
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    std::vector<CellIndex> coords = input.coords;
    nn::Matrix<Scalar> feats = input.size() > 0 ? input.features : nn::Matrix<Scalar>(kChannels[0], 0);
    for (int l = 0; l < 3; ++l) {
      c.books[l] = build_rulebook(coords);
      c.inputs[l] = std::move(feats);
      c.pre[l] = convs_[l].forward(c.inputs[l], c.books[l]);
      feats = nn::activate(c.pre[l], nn::Activation::kRelu);
      coords = c.books[l].out_coords;
    }
    c.pooled_sites = feats.cols();
    c.pooled = nn::Matrix<Scalar>::Zero(kChannels[3], 1);
    if (feats.cols() > 0) c.pooled.col(0) = feats.rowwise().mean();
    return fc_.forward(c.pooled).col(0);
  }

  void backward(const Cache& c, const nn::Vector<Scalar>& grad_out) {
    nn::Matrix<Scalar> g = fc_.backward(c.pooled, nn::Matrix<Scalar>(grad_out));
    if (c.pooled_sites == 0) return;
    nn::Matrix<Scalar> grad_feats(kChannels[3], c.pooled_sites);
    grad_feats.colwise() = g.col(0) / Scalar(c.pooled_sites);
    for (int l = 2; l >= 0; --l) {
      const nn::Matrix<Scalar> grad_pre =
          grad_feats.cwiseProduct(nn::activation_grad(c.pre[l], nn::Activation::kRelu));
      grad_feats = convs_[l].backward(c.inputs[l], c.books[l], grad_pre);
    }
  }

  void zero_grad() {
    for (auto& conv : convs_) conv.zero_grad();
    fc_.zero_grad();
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<Scalar>& f) {
    for (int l = 0; l < 3; ++l) convs_[l].visit(prefix + ".conv" + std::to_string(l), f);
    fc_.visit(prefix + ".fc", f);
  }

  SparseConv3d<Scalar>& conv(int l) { return convs_[l]; }
  const SparseConv3d<Scalar>& conv(int l) const { return convs_[l]; }
  nn::Linear<Scalar>& fc() { return fc_; }
  const nn::Linear<Scalar>& fc() const { return fc_; }

 private:
  std::array<SparseConv3d<Scalar>, 3> convs_;
  nn::Linear<Scalar> fc_;
};

/// Workspace frame used to normalise pose inputs.
struct Workspace {
  Vec3 center = Vec3::Zero();
  double extent = 0.8;
};

/// Pose history as an (history * 9) column: translation relative to the
/// workspace center divided by the extent, then the 6D rotation. Histories
/// shorter than `history` are left-padded with their first pose.
template <typename Scalar = double>
nn::Vector<Scalar> pose_history_input(std::span<const Pose> poses, int history, const Workspace& ws) {
  if (poses.empty()) throw std::invalid_argument("pose history is empty");
  if (static_cast<int>(poses.size()) > history) poses = poses.subspan(poses.size() - history);
  nn::Vector<Scalar> x(history * kPoseParamDim);
  const int pad = history - static_cast<int>(poses.size());
  for (int s = 0; s < history; ++s) {
    const Pose& p = poses[std::max(0, s - pad)];
    x.template segment<3>(s * kPoseParamDim) = ((p.translation - ws.center) / ws.extent).template cast<Scalar>();
    x.template segment<6>(s * kPoseParamDim + 3) = rotation_to_6d(p.rotation).template cast<Scalar>();
  }
  return x;
}

/// Two-layer MLP over the flattened pose history.
template <typename Scalar>
class PoseEncoder {
 public:
  static constexpr int kHidden = 64;

  PoseEncoder() : PoseEncoder(2) {}
  explicit PoseEncoder(int history)
      : history_(history), mlp_({history * kPoseParamDim, kHidden, kPoseFeatureDim}, nn::Activation::kRelu) {}

  template <typename Rng>
  void init_uniform(Rng& rng) {
    mlp_.init_uniform(rng);
  }

  int history() const { return history_; }

  /// inputs: (history * 9) x batch.
  nn::Matrix<Scalar> forward(const nn::Matrix<Scalar>& inputs, typename nn::Mlp<Scalar>::Cache* cache = nullptr) const {
    if (inputs.rows() != history_ * kPoseParamDim) throw std::invalid_argument("PoseEncoder: input size mismatch");
    return mlp_.forward(inputs, cache);
  }

  void backward(const typename nn::Mlp<Scalar>::Cache& cache, const nn::Matrix<Scalar>& grad_out) {
    mlp_.backward(cache, grad_out);
  }

  void zero_grad() { mlp_.zero_grad(); }
  void visit(const std::string& prefix, const nn::ParamVisitor<Scalar>& f) { mlp_.visit(prefix, f); }
  nn::Mlp<Scalar>& mlp() { return mlp_; }
  const nn::Mlp<Scalar>& mlp() const { return mlp_; }

 private:
  int history_;
  nn::Mlp<Scalar> mlp_;
};

template <typename Scalar>
nn::Vector<Scalar> encode_pose_history(const PoseEncoder<Scalar>& enc, std::span<const Pose> poses, const Workspace& ws) {
  return enc.forward(nn::Matrix<Scalar>(pose_history_input<Scalar>(poses, enc.history(), ws))).col(0);
}

/// Camera features first, then grid features.
template <typename Scalar>
nn::Vector<Scalar> condition(const nn::Vector<Scalar>& e_cam, const nn::Vector<Scalar>& e_ogm) {
  if (e_cam.size() != kPoseFeatureDim || e_ogm.size() != kGridFeatureDim) {
    throw std::invalid_argument("condition: expected 32 camera and 64 grid features");
  }
  nn::Vector<Scalar> e(kConditionDim);
  e << e_cam, e_ogm;
  return e;
}

}  // namespace scandp
