#pragma once

// Sample-based estimators over terminal states: sibling win rate phi and
// its pseudoreward, terminal dispersion, and terminal histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "srl/core/rng.hpp"
#include "srl/env/task.hpp"
#include "srl/rewards.hpp"
#include "srl/sibling_rivalry.hpp"
#include "srl/trajectory.hpp"

namespace srl {

struct TerminalSampleSet {
  std::vector<GoalVec> points;  // m(s_T), one per rollout
  std::size_t size() const { return points.size(); }
};

/// Fraction of `n_samples` fresh rollouts from the episode's start and goal
/// whose naive reward is strictly below that of `tau`. Ties count as losses.
template <class Policy, GoalEnvironment E>
double estimate_phi(const Trajectory& tau, const Policy& policy, const E& env,
                    const EpisodeInit<typename E::State>& init, int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("estimate_phi needs at least one sample");
  const GoalTaskSpec& task = env.spec();
  const RewardContext ctx{&task, init.goal, std::nullopt};
  const double r_tau = naive_shaped_reward(tau.terminal, ctx);
  int wins = 0;
  for (int i = 0; i < n_samples; ++i) {
    const Trajectory other = collect_rollout(policy, env, init, rng);
    if (r_tau > naive_shaped_reward(other.terminal, ctx)) ++wins;
  }
  return static_cast<double>(wins) / n_samples;
}

/// psi = 2 phi - 1.
inline double pseudoreward(double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("phi must lie in [0, 1]");
  return 2.0 * phi - 1.0;
}

/// Mean distance over all unordered pairs of distinct samples.
inline double terminal_dispersion(const TerminalSampleSet& s, const GoalTaskSpec& task) {
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("terminal dispersion needs at least two samples");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += task_distance(task, s.points[i], s.points[j]);
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

struct TerminalHistogram {
  Bounds2 bounds;
  int resolution = 1;
  std::vector<std::uint64_t> counts;  // row-major, row = y bin
  std::size_t total = 0;

  std::uint64_t at(int ix, int iy) const { return counts[static_cast<std::size_t>(iy * resolution + ix)]; }

  /// Bin with the most points; the lowest index wins ties.
  std::pair<int, int> mode_cell() const {
    const auto it = std::max_element(counts.begin(), counts.end());
    const auto idx = static_cast<int>(it - counts.begin());
    return {idx % resolution, idx / resolution};
  }

  std::array<double, 2> mode_center() const {
    const auto [ix, iy] = mode_cell();
    const double wx = (bounds.x_max - bounds.x_min) / resolution;
    const double wy = (bounds.y_max - bounds.y_min) / resolution;
    return {bounds.x_min + (ix + 0.5) * wx, bounds.y_min + (iy + 0.5) * wy};
  }
};

/// Bins 2D points; anything outside `bounds` lands in the nearest edge bin.
inline TerminalHistogram terminal_histogram(const std::vector<std::array<double, 2>>& points, const Bounds2& bounds,
                                            int resolution) {
  if (resolution < 1) throw std::invalid_argument("histogram resolution must be at least 1");
  TerminalHistogram h;
  h.bounds = bounds;
  h.resolution = resolution;
  h.counts.assign(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution), 0);
  auto bin = [resolution](double v, double lo, double hi) {
    const double f = (v - lo) / (hi - lo);
    if (!(f >= 0.0)) return 0;
    return std::min(resolution - 1, static_cast<int>(std::floor(f * resolution)));
  };
  for (const auto& p : points) {
    const int ix = bin(p[0], bounds.x_min, bounds.x_max);
    const int iy = bin(p[1], bounds.y_min, bounds.y_max);
    h.counts[static_cast<std::size_t>(iy * resolution + ix)] += 1;
  }
  h.total = points.size();
  return h;
}

}  // namespace srl
