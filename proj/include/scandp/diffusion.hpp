#pragma once

#include "scandp/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace scandp {

/// Variance-preserving DDPM schedule with a linear beta ramp. All per-step
/// arrays are indexed by k in [1, K]; index 0 is unused.
///   forward:  a^k = signal(k) a^0 + noise(k) eps,  signal^2 + noise^2 = 1
///   reverse:  a^{k-1} = alpha(k) (a^k - gamma(k) eps_theta) + sigma(k) z
struct DiffusionSchedule {
  int steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;
  std::vector<double> signal;  // sqrt of the cumulative product of (1 - beta)
  std::vector<double> noise;   // sqrt(1 - signal^2)
  std::vector<double> alpha;   // 1 / sqrt(1 - beta)
  std::vector<double> gamma;   // beta / noise
  std::vector<double> sigma;   // posterior standard deviation; sigma(1) = 0
};

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end);

/// signal(k) a0 + noise(k) eps, elementwise.
template <typename Scalar>
nn::Matrix<Scalar> forward_diffuse(const DiffusionSchedule& s, const nn::Matrix<Scalar>& a0, int k,
                                   const nn::Matrix<Scalar>& eps) {
  if (k < 1 || k > s.steps) throw std::out_of_range("forward_diffuse: step out of range");
  if (a0.rows() != eps.rows() || a0.cols() != eps.cols()) throw std::invalid_argument("forward_diffuse: shape mismatch");
  return Scalar(s.signal[k]) * a0 + Scalar(s.noise[k]) * eps;
}

/// One reverse update of a single column block at step k.
template <typename Scalar>
nn::Matrix<Scalar> denoise_step(const DiffusionSchedule& s, const nn::Matrix<Scalar>& ak, int k,
                                const nn::Matrix<Scalar>& eps_pred, const nn::Matrix<Scalar>& z) {
  return Scalar(s.alpha[k]) * (ak - Scalar(s.gamma[k]) * eps_pred) + Scalar(s.sigma[k]) * z;
}

/// Runs the reverse chain from `ak` (the draw at step K) down to step 0.
/// `predict(a, k)` returns eps_theta for every column of `a`; the final
/// update adds no noise.
template <typename Scalar, typename Predict, typename Rng>
nn::Matrix<Scalar> reverse_diffusion(const DiffusionSchedule& s, nn::Matrix<Scalar> ak, Predict&& predict, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  nn::Matrix<Scalar> z(ak.rows(), ak.cols());
  for (int k = s.steps; k >= 1; --k) {
    const nn::Matrix<Scalar> eps = predict(ak, k);
    if (k > 1) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = Scalar(gauss(rng));
    } else {
      z.setZero();
    }
    ak = denoise_step(s, ak, k, eps, z);
    if (!ak.allFinite()) throw std::runtime_error("reverse diffusion produced a non-finite value");
  }
  return ak;
}

template <typename Scalar>
nn::Matrix<Scalar> timestep_embedding(const std::vector<int>& ks, int dim) {
  nn::Matrix<Scalar> emb(dim, static_cast<Eigen::Index>(ks.size()));
  const int half = dim / 2;
  for (std::size_t b = 0; b < ks.size(); ++b) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      emb(i, b) = Scalar(std::sin(ks[b] * freq));
      emb(i + half, b) = Scalar(std::cos(ks[b] * freq));
    }
  }
  return emb;
}

/// eps_theta(a^k, k, e): MLP over [noisy action ; timestep embedding ; condition].
///
/// With preconditioning enabled the MLP output F is mapped to
///   eps = c_skip(k) a^k + c_out(k) F,
///   c_skip = noise / (signal^2 s^2 + noise^2),  c_out = signal s / sqrt(signal^2 s^2 + noise^2),
/// where s is the per-dimension data scale. c_skip a^k is the optimal noise
/// estimate under a N(0, s^2) prior on a^0, so F only has to model the
/// residual and keeps unit scale at every step.
template <typename Scalar>
class NoisePredictor {
 public:
  struct Cache {
    typename nn::Mlp<Scalar>::Cache mlp;
    std::vector<int> ks;
  };

  NoisePredictor() = default;
  NoisePredictor(int action_dim, int cond_dim, int hidden = 256, int hidden_layers = 3, int time_dim = 32)
      : action_dim_(action_dim), cond_dim_(cond_dim), time_dim_(time_dim) {
    std::vector<int> widths = {action_dim + time_dim + cond_dim};
    for (int l = 0; l < hidden_layers; ++l) widths.push_back(hidden);
    widths.push_back(action_dim);
    mlp_ = nn::Mlp<Scalar>(widths, nn::Activation::kSilu);
  }

  int action_dim() const { return action_dim_; }
  int cond_dim() const { return cond_dim_; }
  int time_dim() const { return time_dim_; }

  /// `data_scale` <= 0 disables preconditioning (eps = F).
  void precondition(const DiffusionSchedule& s, double data_scale) {
    skip_.clear();
    out_.clear();
    if (data_scale <= 0.0) return;
    skip_.assign(static_cast<std::size_t>(s.steps) + 1, 0.0);
    out_.assign(static_cast<std::size_t>(s.steps) + 1, 1.0);
    for (int k = 1; k <= s.steps; ++k) {
      const double a = s.signal[k] * data_scale;
      const double den = a * a + s.noise[k] * s.noise[k];
      skip_[k] = s.noise[k] / den;
      out_[k] = a / std::sqrt(den);
    }
  }
  bool preconditioned() const { return !skip_.empty(); }

  template <typename Rng>
  void init_uniform(Rng& rng) {
    mlp_.init_uniform(rng);
  }

  nn::Matrix<Scalar> forward(const nn::Matrix<Scalar>& noisy, const std::vector<int>& ks, const nn::Matrix<Scalar>& cond,
                             Cache* cache = nullptr) const {
    const auto batch = noisy.cols();
    if (noisy.rows() != action_dim_ || cond.rows() != cond_dim_ || cond.cols() != batch ||
        static_cast<Eigen::Index>(ks.size()) != batch) {
      throw std::invalid_argument("NoisePredictor: shape mismatch");
    }
    nn::Matrix<Scalar> x(action_dim_ + time_dim_ + cond_dim_, batch);
    x.topRows(action_dim_) = noisy;
    x.middleRows(action_dim_, time_dim_) = timestep_embedding<Scalar>(ks, time_dim_);
    if (cond_dim_ > 0) x.bottomRows(cond_dim_) = cond;
    nn::Matrix<Scalar> out = mlp_.forward(x, cache ? &cache->mlp : nullptr);
    if (cache) cache->ks = ks;
    if (!preconditioned()) return out;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto k = static_cast<std::size_t>(check_step(ks[b]));
      out.col(b) = Scalar(skip_[k]) * noisy.col(b) + Scalar(out_[k]) * out.col(b);
    }
    return out;
  }

  /// Accumulates gradients; returns d loss / d condition. The skip path has
  /// no parameters and does not reach the condition.
  nn::Matrix<Scalar> backward(const Cache& cache, const nn::Matrix<Scalar>& grad_out) {
    nn::Matrix<Scalar> g = grad_out;
    if (preconditioned()) {
      for (Eigen::Index b = 0; b < g.cols(); ++b) g.col(b) *= Scalar(out_[static_cast<std::size_t>(cache.ks[b])]);
    }
    const nn::Matrix<Scalar> gx = mlp_.backward(cache.mlp, g);
    return gx.bottomRows(cond_dim_);
  }

  void zero_grad() { mlp_.zero_grad(); }
  void visit(const std::string& prefix, const nn::ParamVisitor<Scalar>& f) { mlp_.visit(prefix, f); }
  nn::Mlp<Scalar>& mlp() { return mlp_; }
  const nn::Mlp<Scalar>& mlp() const { return mlp_; }

 private:
  int check_step(int k) const {
    if (k < 1 || k >= static_cast<int>(skip_.size())) throw std::out_of_range("NoisePredictor: step out of range");
    return k;
  }

  int action_dim_ = 0;
  int cond_dim_ = 0;
  int time_dim_ = 32;
  nn::Mlp<Scalar> mlp_;
  std::vector<double> skip_;
  std::vector<double> out_;
};

}  // namespace scandp
