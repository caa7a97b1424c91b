#include "scandp/path_optimizer.hpp"

#include <algorithm>
#include <stdexcept>

namespace scandp {

BubbleResult bubble_filter(const PoseHorizon& horizon, const std::vector<Vec3>& occupied_centers, double r_min) {
  BubbleResult out;
  out.reports.reserve(horizon.size());
  for (const Pose& p : horizon) {
    BubbleReport r;
    double best2 = std::numeric_limits<double>::infinity();
    for (const Vec3& c : occupied_centers) best2 = std::min(best2, (c - p.translation).squaredNorm());
    r.radius = std::sqrt(best2);
    r.kept = r.radius >= r_min;
    if (r.kept) out.kept.push_back(p);
    out.reports.push_back(r);
  }
  return out;
}

BubbleResult bubble_filter(const PoseHorizon& horizon, const OccupancyGrid& grid, double kappa_occ, double r_min) {
  std::vector<Vec3> centers;
  for (const CellIndex& c : grid.occupied_cells(kappa_occ)) centers.push_back(grid.cell_center(c));
  return bubble_filter(horizon, centers, r_min);
}

Pose interpolate(const PoseHorizon& horizon, double s) {
  if (horizon.empty()) throw std::invalid_argument("interpolate: empty horizon");
  if (horizon.size() == 1) return horizon.front();
  s = std::clamp(s, 0.0, 1.0);
  std::vector<double> cumulative(horizon.size(), 0.0);
  for (std::size_t i = 1; i < horizon.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (horizon[i].translation - horizon[i - 1].translation).norm();
  }
  const double total = cumulative.back();
  if (total <= 0.0) return s < 1.0 ? horizon.front() : horizon.back();
  if (s >= 1.0) return horizon.back();
  const double target = s * total;
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  const std::size_t seg = static_cast<std::size_t>(it - cumulative.begin()) - 1;
  const double len = cumulative[seg + 1] - cumulative[seg];
  const double local = len > 0.0 ? (target - cumulative[seg]) / len : 0.0;
  return blend(horizon[seg], horizon[seg + 1], local);
}

double reconstruction_loss(const PoseHorizon& approx, const PoseHorizon& original) {
  if (approx.empty() || original.empty()) throw std::invalid_argument("reconstruction_loss: empty horizon");
  double worst = 0.0;
  for (const Pose& p : original) {
    double best = (p.translation - approx.front().translation).norm();
    for (std::size_t i = 1; i < approx.size(); ++i) {
      best = std::min(best, point_segment_distance(p.translation, approx[i - 1].translation, approx[i].translation));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

OptimizedHorizon extract_viewpoints(const PoseHorizon& horizon, double eta) {
  if (horizon.empty()) throw std::invalid_argument("extract_viewpoints: empty horizon");
  if (eta < 0.0) throw std::invalid_argument("extract_viewpoints: eta must be >= 0");
  const std::size_t n = horizon.size();

  // feasible[i][j]: every pose strictly between i and j lies within eta of segment (i, j).
  std::vector<std::vector<char>> feasible(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bool ok = true;
      for (std::size_t m = i + 1; m < j && ok; ++m) {
        ok = point_segment_distance(horizon[m].translation, horizon[i].translation, horizon[j].translation) <= eta;
      }
      feasible[i][j] = ok;
    }
  }

  // hops[i]: fewest edges from i to the last pose.
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> hops(n, kUnreached);
  hops[n - 1] = 0;
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (feasible[i][j] && hops[j] != kUnreached) hops[i] = std::min(hops[i], hops[j] + 1);
    }
  }

  OptimizedHorizon out;
  std::size_t i = 0;
  out.indices.push_back(0);
  while (i != n - 1) {
    std::size_t next = i + 1;
    while (!(feasible[i][next] && hops[next] + 1 == hops[i])) ++next;
    out.indices.push_back(next);
    i = next;
  }
  for (std::size_t idx : out.indices) out.poses.push_back(horizon[idx]);
  out.loss = reconstruction_loss(out.poses, horizon);
  if (out.loss > eta + 1e-12) throw std::logic_error("extract_viewpoints: result exceeds the loss budget");
  return out;
}

OptimizedHorizon optimize(const PoseHorizon& horizon, const OccupancyGrid& grid, const PathOptimizerConfig& config) {
  const BubbleResult safe = bubble_filter(horizon, grid, config.kappa_occ, config.r_min);
  if (safe.kept.empty()) {
    OptimizedHorizon out;
    out.empty = true;
    return out;
  }
  return extract_viewpoints(safe.kept, config.eta);
}

}  // namespace scandp
