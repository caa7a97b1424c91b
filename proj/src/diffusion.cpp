#include "scandp/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace scandp {

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("make_schedule: need at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("make_schedule: require 0 < beta_start <= beta_end < 1");
  }
  DiffusionSchedule s;
  s.steps = steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.beta.assign(n, 0.0);
  s.signal.assign(n, 1.0);
  s.noise.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.gamma.assign(n, 0.0);
  s.sigma.assign(n, 0.0);

  double cumulative = 1.0;  // product of (1 - beta_i), i <= k
  for (int k = 1; k <= steps; ++k) {
    const double beta = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * (k - 1) / (steps - 1);
    const double previous = cumulative;
    cumulative *= 1.0 - beta;
    s.beta[k] = beta;
    s.signal[k] = std::sqrt(cumulative);
    s.noise[k] = std::sqrt(1.0 - cumulative);
    s.alpha[k] = 1.0 / std::sqrt(1.0 - beta);
    s.gamma[k] = beta / s.noise[k];
    s.sigma[k] = std::sqrt(beta * (1.0 - previous) / (1.0 - cumulative));
  }
  return s;
}

}  // namespace scandp
