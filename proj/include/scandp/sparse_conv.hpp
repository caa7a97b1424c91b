#pragma once

// Generalized sparse 3D convolution (kernel 3^3, stride 2). Output sites are
// the distinct coarse cells floor(c / 2) of the active inputs; output site o
// gathers inputs at 2 o + d for offsets d in {-1, 0, 1}^3.

#include "scandp/nn.hpp"
#include "scandp/occupancy_grid.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace scandp {

template <typename Scalar>
struct SparseTensor {
  std::vector<CellIndex> coords;
  nn::Matrix<Scalar> features;  // channels x coords.size()
  int stride = 1;

  std::size_t size() const { return coords.size(); }
  int channels() const { return static_cast<int>(features.rows()); }
};

inline constexpr int kKernelVolume = 27;

inline int floor_half(std::int32_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

/// Input/output index pairs per kernel offset for one stride-2 layer.
struct Rulebook {
  std::vector<CellIndex> out_coords;  // lexicographically sorted
  std::array<std::vector<std::int32_t>, kKernelVolume> in_index;
  std::array<std::vector<std::int32_t>, kKernelVolume> out_index;
  std::size_t in_count = 0;
};

/// Offset order: index = (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1).
Rulebook build_rulebook(const std::vector<CellIndex>& in_coords);

template <typename Scalar>
class SparseConv3d {
 public:
  SparseConv3d() = default;
  SparseConv3d(int in_channels, int out_channels)
      : in_(in_channels),
        out_(out_channels),
        weight_(nn::Matrix<Scalar>::Zero(out_channels, kKernelVolume * in_channels)),
        bias_(nn::Matrix<Scalar>::Zero(out_channels, 1)) {
    zero_grad();
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  template <typename Rng>
  void init_uniform(Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(kKernelVolume * in_));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < weight_.size(); ++i) weight_.data()[i] = Scalar(dist(rng));
    for (Eigen::Index i = 0; i < bias_.size(); ++i) bias_.data()[i] = Scalar(dist(rng));
  }

  /// Kernel for offset index `k` (out x in block).
  auto kernel(int k) { return weight_.middleCols(k * in_, in_); }
  auto kernel(int k) const { return weight_.middleCols(k * in_, in_); }

  /// Pre-activation output (out_channels x out_coords).
  nn::Matrix<Scalar> forward(const nn::Matrix<Scalar>& input, const Rulebook& book) const {
    if (input.rows() != in_) throw std::invalid_argument("SparseConv3d: channel mismatch");
    nn::Matrix<Scalar> out(out_, static_cast<Eigen::Index>(book.out_coords.size()));
    out.colwise() = bias_.col(0);
    nn::Matrix<Scalar> gathered;
    for (int k = 0; k < kKernelVolume; ++k) {
      const auto& ins = book.in_index[k];
      const auto& outs = book.out_index[k];
      if (ins.empty()) continue;
      gathered.resize(in_, static_cast<Eigen::Index>(ins.size()));
      for (std::size_t p = 0; p < ins.size(); ++p) gathered.col(p) = input.col(ins[p]);
      const nn::Matrix<Scalar> contrib = kernel(k) * gathered;
      for (std::size_t p = 0; p < outs.size(); ++p) out.col(outs[p]) += contrib.col(p);
    }
    return out;
  }

  /// Accumulates parameter gradients; returns d loss / d input features.
  nn::Matrix<Scalar> backward(const nn::Matrix<Scalar>& input, const Rulebook& book, const nn::Matrix<Scalar>& grad_pre) {
    grad_bias_.col(0) += grad_pre.rowwise().sum();
    nn::Matrix<Scalar> grad_in = nn::Matrix<Scalar>::Zero(in_, input.cols());
    nn::Matrix<Scalar> gathered_in;
    nn::Matrix<Scalar> gathered_grad;
    for (int k = 0; k < kKernelVolume; ++k) {
      const auto& ins = book.in_index[k];
      const auto& outs = book.out_index[k];
      if (ins.empty()) continue;
      const auto n = static_cast<Eigen::Index>(ins.size());
      gathered_in.resize(in_, n);
      gathered_grad.resize(out_, n);
      for (Eigen::Index p = 0; p < n; ++p) {
        gathered_in.col(p) = input.col(ins[p]);
        gathered_grad.col(p) = grad_pre.col(outs[p]);
      }
      grad_weight_.middleCols(k * in_, in_).noalias() += gathered_grad * gathered_in.transpose();
      const nn::Matrix<Scalar> back = kernel(k).transpose() * gathered_grad;
      for (Eigen::Index p = 0; p < n; ++p) grad_in.col(ins[p]) += back.col(p);
    }
    return grad_in;
  }

  void zero_grad() {
    grad_weight_ = nn::Matrix<Scalar>::Zero(weight_.rows(), weight_.cols());
    grad_bias_ = nn::Matrix<Scalar>::Zero(bias_.rows(), 1);
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<Scalar>& f) {
    f(prefix + ".weight", weight_, grad_weight_);
    f(prefix + ".bias", bias_, grad_bias_);
  }

  nn::Matrix<Scalar>& weight() { return weight_; }
  const nn::Matrix<Scalar>& weight() const { return weight_; }
  nn::Matrix<Scalar>& bias() { return bias_; }
  const nn::Matrix<Scalar>& bias() const { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  nn::Matrix<Scalar> weight_;
  nn::Matrix<Scalar> bias_;
  nn::Matrix<Scalar> grad_weight_;
  nn::Matrix<Scalar> grad_bias_;
};

}  // namespace scandp
