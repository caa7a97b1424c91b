#include "scandp/baselines.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace scandp {

namespace {

Pose look_at_center(const Vec3& eye, const Vec3& target) {
  const Vec3 dir = (target - eye).normalized();
  return look_at(eye, target, std::abs(dir.z()) > 0.999 ? Vec3::UnitX() : Vec3::UnitZ());
}

void require_count(int count) {
  if (count < 1) throw std::invalid_argument("viewpoint count must be >= 1");
}

}  // namespace

ViewpointSet random_poses(int count, const Aabb& bounds, const Aabb& excluded, const Vec3& target, std::uint64_t seed) {
  require_count(count);
  if (bounds.empty()) throw std::invalid_argument("random_poses: empty bounds");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ViewpointSet set;
  set.kind = "random";
  set.seed = seed;
  const Vec3 size = bounds.max - bounds.min;
  long attempts = 0;
  while (static_cast<int>(set.poses.size()) < count) {
    if (++attempts > 1000L * count + 100000) throw std::runtime_error("random_poses: bounds are almost fully excluded");
    const Vec3 p = bounds.min + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(size);
    if (excluded.contains(p) || (p - target).norm() < 1e-9) continue;
    set.poses.push_back(look_at_center(p, target));
  }
  return set;
}

ViewpointSet fibonacci_hemisphere(int count, const Vec3& center, double radius) {
  require_count(count);
  if (!(radius > 0.0)) throw std::invalid_argument("fibonacci_hemisphere: radius must be positive");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  ViewpointSet set;
  set.kind = "uniform-hemisphere";
  set.radius = radius;
  for (int n = 0; n < count; ++n) {
    const double z = count == 1 ? 1.0 : 1.0 - (n + 0.5) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * n;
    const Vec3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
    set.poses.push_back(look_at_center(center + radius * dir, center));
  }
  return set;
}

ViewpointSet random_hemisphere(int count, const Vec3& center, double radius, std::uint64_t seed) {
  require_count(count);
  if (!(radius > 0.0)) throw std::invalid_argument("random_hemisphere: radius must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ViewpointSet set;
  set.kind = "random-hemisphere";
  set.seed = seed;
  set.radius = radius;
  for (int n = 0; n < count; ++n) {
    const double z = u(rng);
    const double phi = 2.0 * std::numbers::pi * u(rng);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
    set.poses.push_back(look_at_center(center + radius * dir, center));
  }
  return set;
}

double tour_length(const Vec3& start, const std::vector<Vec3>& points, const std::vector<std::size_t>& order) {
  double len = 0.0;
  Vec3 prev = start;
  for (std::size_t idx : order) {
    len += (points[idx] - prev).norm();
    prev = points[idx];
  }
  return len;
}

namespace {

std::vector<std::size_t> nearest_neighbour(const Vec3& start, const std::vector<Vec3>& points, std::size_t first) {
  const std::size_t n = points.size();
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<char> used(n, 0);
  if (first < n) {
    used[first] = 1;
    order.push_back(first);
  }
  Vec3 cur = order.empty() ? start : points[first];
  while (order.size() < n) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double d = (points[i] - cur).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    used[best] = 1;
    order.push_back(best);
    cur = points[best];
  }
  return order;
}

// Local search on the open path start, order[0], ..., order[n-1] with
// first-improvement sweeps. 2-opt reverses order[i..j], replacing edges
// (prev(i), i) and (j, next(j)); the latter is absent when j is the tail.
// Or-opt moves a run of up to three stops elsewhere, optionally reversed.
void improve(const Vec3& start, const std::vector<Vec3>& points, std::vector<std::size_t>& order, int max_passes,
             bool relocate) {
  const std::size_t n = order.size();
  const std::size_t m = n + 1;  // path positions including start
  auto at = [&](std::size_t pos) -> const Vec3& { return pos == 0 ? start : points[order[pos - 1]]; };
  auto dist = [&](std::size_t a, std::size_t b) { return (at(a) - at(b)).norm(); };

  auto two_opt = [&] {
    bool improved = false;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        double delta = dist(i - 1, j) - dist(i - 1, i);
        if (j + 1 < m) delta += dist(i, j + 1) - dist(j, j + 1);
        if (delta < -1e-12) {
          std::reverse(order.begin() + static_cast<long>(i - 1), order.begin() + static_cast<long>(j));
          improved = true;
        }
      }
    }
    return improved;
  };

  auto or_opt = [&] {
    for (std::size_t len = 1; len <= 3; ++len) {
      for (std::size_t i = 1; i + len <= m; ++i) {
        const std::size_t last = i + len - 1;
        const double removed =
            dist(i - 1, i) + (last + 1 == m ? 0.0 : dist(last, last + 1) - dist(i - 1, last + 1));
        for (std::size_t k = 0; k < m; ++k) {
          if (k + 1 >= i && k <= last) continue;  // reinsertion point inside or next to the run
          for (int rev = 0; rev < 2; ++rev) {
            const std::size_t head = rev ? last : i;
            const std::size_t tail = rev ? i : last;
            const double added = dist(k, head) + (k + 1 == m ? 0.0 : dist(tail, k + 1) - dist(k, k + 1));
            if (added - removed >= -1e-12) continue;
            std::vector<std::size_t> run(order.begin() + static_cast<long>(i - 1), order.begin() + static_cast<long>(last));
            if (rev) std::reverse(run.begin(), run.end());
            order.erase(order.begin() + static_cast<long>(i - 1), order.begin() + static_cast<long>(last));
            const std::size_t insert = k > last ? k - len : k;
            order.insert(order.begin() + static_cast<long>(insert), run.begin(), run.end());
            return true;
          }
        }
      }
    }
    return false;
  };

  for (int pass = 0; pass < max_passes; ++pass) {
    bool improved = two_opt();
    if (relocate) {
      for (std::size_t moves = 0; moves < 100 * n && or_opt(); ++moves) improved = true;
    }
    if (!improved) break;
  }
}

}  // namespace

std::vector<std::size_t> tsp_order_points(const Vec3& start, const std::vector<Vec3>& points, int max_passes) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("tsp_order: empty viewpoint set");
  if (max_passes <= 0) return nearest_neighbour(start, points, n);

  // Nearest-neighbour tour improved by 2-opt alone, then restarts with
  // 2-opt plus Or-opt from the same tour and from every forced first stop.
  // The best tour wins, so the result is never longer than plain 2-opt.
  std::vector<std::size_t> best = nearest_neighbour(start, points, n);
  improve(start, points, best, max_passes, false);
  double best_len = tour_length(start, points, best);
  for (std::size_t first = 0; first <= n; ++first) {
    std::vector<std::size_t> order = nearest_neighbour(start, points, first);
    improve(start, points, order, max_passes, true);
    const double len = tour_length(start, points, order);
    if (len < best_len - 1e-12) {
      best_len = len;
      best = std::move(order);
    }
  }
  return best;
}

PoseHorizon tsp_order(const std::vector<Pose>& viewpoints, const Pose& start, int max_passes) {
  std::vector<Vec3> points;
  points.reserve(viewpoints.size());
  for (const Pose& p : viewpoints) points.push_back(p.translation);
  PoseHorizon tour;
  for (std::size_t idx : tsp_order_points(start.translation, points, max_passes)) tour.push_back(viewpoints[idx]);
  return tour;
}

}  // namespace scandp
