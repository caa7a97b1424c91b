#pragma once

// Unconditional DDPM on a two-component 2D Gaussian mixture, shared by the
// unit tests and the acceptance binary.

#include "scandp/diffusion.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace toy {

using M = scandp::nn::Matrix<double>;

struct Mixture {
  double weight_a = 0.3;  // mass of the component centred at -center
  double center = 0.6;    // components at (-c, -c) and (c, c)
  double spread = 0.1;

  M draw(int count, std::mt19937_64& rng) const {
    std::bernoulli_distribution pick_a(weight_a);
    std::normal_distribution<double> g(0.0, spread);
    M x(2, count);
    for (int b = 0; b < count; ++b) {
      const double c = pick_a(rng) ? -center : center;
      x(0, b) = c + g(rng);
      x(1, b) = c + g(rng);
    }
    return x;
  }
};

struct Result {
  double final_loss = 0.0;
  double mass_a = 0.0;  // fraction of samples on the -center side
  double seconds = 0.0;
};

inline Result train_and_sample(const Mixture& mix, int steps, int samples, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const scandp::DiffusionSchedule s = scandp::make_schedule(100, 1e-3, 0.2);
  scandp::NoisePredictor<double> net(2, 0, 128, 3, 32);
  net.precondition(s, 0.6);
  std::mt19937_64 rng(seed);
  net.init_uniform(rng);
  scandp::nn::Optimizer<double> opt(scandp::nn::Optimizer<double>::Kind::kAdam, 1e-3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pick_k(1, s.steps);
  const int batch = 128;
  Result r;
  double avg = 0.0;
  for (int it = 0; it < steps; ++it) {
    const M a0 = mix.draw(batch, rng);
    M eps(2, batch), noisy(2, batch);
    std::vector<int> ks(batch);
    for (int b = 0; b < batch; ++b) {
      ks[b] = pick_k(rng);
      eps(0, b) = gauss(rng);
      eps(1, b) = gauss(rng);
      noisy.col(b) = scandp::forward_diffuse(s, M(a0.col(b)), ks[b], M(eps.col(b)));
    }
    typename scandp::NoisePredictor<double>::Cache cache;
    const M diff = net.forward(noisy, ks, M(0, batch), &cache) - eps;
    const double loss = diff.squaredNorm() / double(diff.size());
    avg = it == 0 ? loss : 0.99 * avg + 0.01 * loss;
    net.zero_grad();
    net.backward(cache, diff * (2.0 / double(diff.size())));
    opt.set_learning_rate(0.5e-3 * (1.0 + std::cos(M_PI * it / steps)));
    opt.begin_step();
    net.visit("toy", opt.updater());
  }
  r.final_loss = avg;

  M ak(2, samples);
  for (Eigen::Index i = 0; i < ak.size(); ++i) ak.data()[i] = gauss(rng);
  const M out = scandp::reverse_diffusion(
      s, ak, [&](const M& a, int k) { return net.forward(a, std::vector<int>(a.cols(), k), M(0, a.cols())); }, rng);
  int side_a = 0;
  for (int b = 0; b < samples; ++b) side_a += out(0, b) + out(1, b) < 0.0;
  r.mass_a = double(side_a) / samples;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace toy
