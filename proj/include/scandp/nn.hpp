#pragma once

// Minimal dense layers with hand-written backward passes. Batches are stored
// column-wise: a (features x batch) matrix holds one sample per column.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scandp::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { kIdentity, kRelu, kSilu };

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& x, Activation act) {
  using Scalar = typename Derived::Scalar;
  using Result = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  switch (act) {
    case Activation::kRelu:
      return Result(x.cwiseMax(Scalar(0)));
    case Activation::kSilu:
      return Result(x.array() / (Scalar(1) + (-x.array()).exp()));
    case Activation::kIdentity:
      break;
  }
  return Result(x);
}

/// d activation / d pre-activation, elementwise.
template <typename Derived>
auto activation_grad(const Eigen::MatrixBase<Derived>& x, Activation act) {
  using Scalar = typename Derived::Scalar;
  using Result = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  switch (act) {
    case Activation::kRelu:
      return Result((x.array() > Scalar(0)).template cast<Scalar>());
    case Activation::kSilu: {
      const auto sig = (Scalar(1) / (Scalar(1) + (-x.array()).exp())).eval();
      return Result(sig * (Scalar(1) + x.array() * (Scalar(1) - sig)));
    }
    case Activation::kIdentity:
      break;
  }
  return Result(Result::Ones(x.rows(), x.cols()));
}

/// Callback used to enumerate trainable tensors: (name, value, gradient).
template <typename Scalar>
using ParamVisitor = std::function<void(const std::string&, Matrix<Scalar>&, Matrix<Scalar>&)>;

template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out) : weight_(Matrix<Scalar>::Zero(out, in)), bias_(Matrix<Scalar>::Zero(out, 1)) { zero_grad(); }

  int in_features() const { return static_cast<int>(weight_.cols()); }
  int out_features() const { return static_cast<int>(weight_.rows()); }

  /// Uniform in +-1/sqrt(fan_in) for weights and bias.
  template <typename Rng>
  void init_uniform(Rng& rng) {
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(std::max(1, in_features())));
    std::uniform_real_distribution<double> dist(-double(bound), double(bound));
    for (Eigen::Index i = 0; i < weight_.size(); ++i) weight_.data()[i] = Scalar(dist(rng));
    for (Eigen::Index i = 0; i < bias_.size(); ++i) bias_.data()[i] = Scalar(dist(rng));
  }

  template <typename Derived>
  Matrix<Scalar> forward(const Eigen::MatrixBase<Derived>& x) const {
    if (x.rows() != weight_.cols()) throw std::invalid_argument("Linear: input size mismatch");
    Matrix<Scalar> y = weight_ * x;
    y.colwise() += bias_.col(0);
    return y;
  }

  /// Accumulates parameter gradients; returns d loss / d input.
  template <typename DerivedX, typename DerivedG>
  Matrix<Scalar> backward(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedG>& grad_out) {
    grad_weight_.noalias() += grad_out * x.transpose();
    grad_bias_.col(0) += grad_out.rowwise().sum();
    return weight_.transpose() * grad_out;
  }

  void zero_grad() {
    grad_weight_ = Matrix<Scalar>::Zero(weight_.rows(), weight_.cols());
    grad_bias_ = Matrix<Scalar>::Zero(bias_.rows(), 1);
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    f(prefix + ".weight", weight_, grad_weight_);
    f(prefix + ".bias", bias_, grad_bias_);
  }

  Matrix<Scalar>& weight() { return weight_; }
  const Matrix<Scalar>& weight() const { return weight_; }
  Matrix<Scalar>& bias() { return bias_; }
  const Matrix<Scalar>& bias() const { return bias_; }

 private:
  Matrix<Scalar> weight_;
  Matrix<Scalar> bias_;
  Matrix<Scalar> grad_weight_;
  Matrix<Scalar> grad_bias_;
};

/// Stack of Linear layers with a shared hidden activation and a linear output.
template <typename Scalar>
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix<Scalar>> inputs;  // input of each layer
    std::vector<Matrix<Scalar>> pre;     // pre-activation of each hidden layer
  };

  Mlp() = default;
  Mlp(const std::vector<int>& widths, Activation hidden) : hidden_(hidden) {
    if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1]);
  }

  template <typename Rng>
  void init_uniform(Rng& rng) {
    for (auto& layer : layers_) layer.init_uniform(rng);
  }

  int in_features() const { return layers_.front().in_features(); }
  int out_features() const { return layers_.back().out_features(); }
  std::size_t depth() const { return layers_.size(); }
  Linear<Scalar>& layer(std::size_t i) { return layers_[i]; }
  const Linear<Scalar>& layer(std::size_t i) const { return layers_[i]; }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    Matrix<Scalar> h = x;
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (cache) cache->inputs.push_back(h);
      Matrix<Scalar> z = layers_[i].forward(h);
      if (i + 1 == layers_.size()) return z;
      h = activate(z, hidden_);
      if (cache) cache->pre.push_back(std::move(z));
    }
    return h;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& grad_out) {
    Matrix<Scalar> g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size()) g = g.cwiseProduct(activation_grad(cache.pre[i], hidden_));
      g = layers_[i].backward(cache.inputs[i], g);
    }
    return g;
  }

  void zero_grad() {
    for (auto& layer : layers_) layer.zero_grad();
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].visit(prefix + "." + std::to_string(i), f);
  }

 private:
  std::vector<Linear<Scalar>> layers_;
  Activation hidden_ = Activation::kRelu;
};

/// Plain SGD or Adam over a parameter set enumerated by a visitor. State is
/// keyed by visitation order, which must be stable across calls.
template <typename Scalar>
class Optimizer {
 public:
  enum class Kind { kSgd, kAdam };

  Optimizer() = default;
  Optimizer(Kind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  Kind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return step_; }

  /// Call as `opt.begin_step(); model.visit(..., opt.updater());`.
  void begin_step() {
    ++step_;
    slot_ = 0;
  }

  ParamVisitor<Scalar> updater() {
    return [this](const std::string&, Matrix<Scalar>& value, Matrix<Scalar>& grad) { update(value, grad); };
  }

 private:
  void update(Matrix<Scalar>& value, const Matrix<Scalar>& grad) {
    if (kind_ == Kind::kSgd) {
      value -= Scalar(lr_) * grad;
      return;
    }
    if (slot_ >= m_.size()) {
      m_.push_back(Matrix<Scalar>::Zero(value.rows(), value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(value.rows(), value.cols()));
    }
    auto& m = m_[slot_];
    auto& v = v_[slot_];
    ++slot_;
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    m = Scalar(kBeta1) * m + Scalar(1 - kBeta1) * grad;
    v = Scalar(kBeta2) * v + Scalar(1 - kBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, double(step_));
    const double c2 = 1.0 - std::pow(kBeta2, double(step_));
    value.array() -= Scalar(lr_ / c1) * m.array() / ((v.array() / Scalar(c2)).sqrt() + Scalar(kEps));
  }

  Kind kind_ = Kind::kSgd;
  double lr_ = 1e-3;
  long step_ = 0;
  std::size_t slot_ = 0;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
};

}  // namespace scandp::nn
