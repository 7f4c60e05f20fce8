#pragma once

// Warped circular track: a 1D agent whose position along the track is
// embedded in the plane. The L2 distance-to-goal has a second basin on the
// way the agent is naturally pulled first; reaching the goal requires
// climbing out over a distance ridge.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "srl/env/maze.hpp"
#include "srl/env/task.hpp"

namespace srl {

/// p(theta) = R(theta) (cos theta, sin theta) with R(theta) = 3 + cos(2 theta).
inline Vec2 track_embed(double theta) {
  const double r = 3.0 + std::cos(2.0 * theta);
  return {r * std::cos(theta), r * std::sin(theta)};
}

inline double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta + std::numbers::pi, two_pi);
  if (t < 0) t += two_pi;
  return t - std::numbers::pi;
}

struct TrackConfig {
  double theta_start = -std::numbers::pi / 2;
  double theta_goal = std::numbers::pi / 2;
  double action_bound = 0.7;
  double threshold = 0.8;
  int horizon = 5;
};

class TrackEnv {
 public:
  struct State {
    double theta = 0.0;
    bool operator==(const State&) const = default;
  };

  explicit TrackEnv(TrackConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.action_bound > 0.0)) throw std::invalid_argument("track action bound must be positive");
    spec_.name = "track";
    spec_.state_feature_dim = 2;
    spec_.goal_feature_dim = 2;
    spec_.goal_dim = 2;
    const auto b = static_cast<float>(cfg_.action_bound);
    spec_.action = ActionSpace::box({-b}, {b});
    spec_.goal_map = GoalMap::position;
    spec_.distance = DistanceKind::l2;
    spec_.threshold = cfg_.threshold;
    spec_.horizon = cfg_.horizon;
    spec_.spatial = true;
    spec_.arena = {-4, -4, 4, 4};
    spec_.validate();
  }

  const GoalTaskSpec& spec() const { return spec_; }
  const TrackConfig& config() const { return cfg_; }

  State sample_start(Rng&) const { return {wrap_angle(cfg_.theta_start)}; }

  EpisodeInit<State> sample_init(Rng& rng) const {
    EpisodeInit<State> init;
    init.seed = rng();
    init.start = sample_start(rng);
    init.goal = achieved_goal({cfg_.theta_goal});
    return init;
  }

  State transition(const State& s, const Action& a) const { return {wrap_angle(s.theta + a.values[0])}; }

  GoalVec achieved_goal(const State& s) const {
    const Vec2 p = track_embed(s.theta);
    return {static_cast<float>(p.x), static_cast<float>(p.y)};
  }

  std::vector<float> features(const State& s) const {
    const Vec2 p = track_embed(s.theta);
    return {static_cast<float>(p.x / 4.0), static_cast<float>(p.y / 4.0)};
  }

  std::vector<float> goal_features(const GoalVec& g) const {
    if (g.size() != 2) throw std::invalid_argument("track goals are 2D");
    return {g[0] / 4.0f, g[1] / 4.0f};
  }

  std::array<double, 2> position(const State& s) const {
    const Vec2 p = track_embed(s.theta);
    return {p.x, p.y};
  }

 private:
  TrackConfig cfg_;
  GoalTaskSpec spec_;
};

}  // namespace srl
