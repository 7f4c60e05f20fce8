#pragma once

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srl/env/maze.hpp"
#include "srl/env/task.hpp"

namespace srl {

struct PointMazeConfig {
  std::string name = "point_maze";
  MazeLayout layout;
  Bounds2 start_region{0, 0, 1, 1};
  Bounds2 goal_region{9, 9, 10, 10};
  double action_bound = 0.95;
  double threshold = 0.15;
  int horizon = 50;
};

/// Continuous point agent in a maze of unit cells. Observes its coordinates
/// (never the walls); actions are displacements resolved against the walls.
class PointMazeEnv {
 public:
  struct State {
    Vec2 pos;
    bool operator==(const State&) const = default;
  };

  explicit PointMazeEnv(PointMazeConfig cfg) : cfg_(std::move(cfg)) {
    const auto& m = cfg_.layout;
    if (m.cell_count() == 0) throw std::invalid_argument("point maze needs a layout");
    const Bounds2 arena{0, 0, static_cast<double>(m.width()), static_cast<double>(m.height())};
    for (const Bounds2* r : {&cfg_.start_region, &cfg_.goal_region})
      if (!(arena.contains(r->x_min, r->y_min) && arena.contains(r->x_max, r->y_max)))
        throw std::invalid_argument("point maze regions must lie inside the arena");
    if (!(cfg_.action_bound > 0.0)) throw std::invalid_argument("action bound must be positive");
    spec_.name = cfg_.name;
    spec_.state_feature_dim = 2;
    spec_.goal_feature_dim = 2;
    spec_.goal_dim = 2;
    const auto b = static_cast<float>(cfg_.action_bound);
    spec_.action = ActionSpace::box({-b, -b}, {b, b});
    spec_.goal_map = GoalMap::identity;
    spec_.distance = DistanceKind::l2;
    spec_.threshold = cfg_.threshold;
    spec_.horizon = cfg_.horizon;
    spec_.spatial = true;
    spec_.arena = arena;
    spec_.validate();
  }

  /// Square perfect maze; start in the bottom-left cell, goal in the top-right.
  static PointMazeEnv maze(int side, std::uint64_t maze_seed) {
    PointMazeConfig cfg;
    cfg.layout = generate_maze(side, maze_seed);
    const double s = side;
    cfg.start_region = {0, 0, 1, 1};
    cfg.goal_region = {s - 1, s - 1, s, s};
    return PointMazeEnv(std::move(cfg));
  }

  /// Start at the left end, goal at the right end.
  static PointMazeEnv corridor(int length) {
    PointMazeConfig cfg;
    cfg.name = "corridor";
    cfg.layout = corridor_layout(length);
    cfg.start_region = {0, 0, 1, 1};
    cfg.goal_region = {length - 1.0, 0, static_cast<double>(length), 1};
    return PointMazeEnv(std::move(cfg));
  }

  /// Start at the bottom-left end, goal directly above it at the top-left
  /// end, on the far side of the dividing wall.
  static PointMazeEnv umaze(int length) {
    PointMazeConfig cfg;
    cfg.name = "umaze";
    cfg.layout = umaze_layout(length);
    cfg.start_region = {0, 0, 1, 1};
    cfg.goal_region = {0, 1, 1, 2};
    return PointMazeEnv(std::move(cfg));
  }

  const GoalTaskSpec& spec() const { return spec_; }
  const MazeLayout& layout() const { return cfg_.layout; }
  const PointMazeConfig& config() const { return cfg_; }

  State sample_start(Rng& rng) const {
    const auto& r = cfg_.start_region;
    return {{rng.uniform(r.x_min, r.x_max), rng.uniform(r.y_min, r.y_max)}};
  }

  GoalVec sample_goal(Rng& rng) const {
    const auto& r = cfg_.goal_region;
    const double x = rng.uniform(r.x_min, r.x_max);
    const double y = rng.uniform(r.y_min, r.y_max);
    return {static_cast<float>(x), static_cast<float>(y)};
  }

  EpisodeInit<State> sample_init(Rng& rng) const {
    EpisodeInit<State> init;
    init.seed = rng();
    init.start = sample_start(rng);
    init.goal = sample_goal(rng);
    return init;
  }

  State transition(const State& s, const Action& a) const {
    const Vec2 to{s.pos.x + a.values[0], s.pos.y + a.values[1]};
    return {resolve_point_collision(cfg_.layout, s.pos, to)};
  }

  GoalVec achieved_goal(const State& s) const {
    return {static_cast<float>(s.pos.x), static_cast<float>(s.pos.y)};
  }

  std::vector<float> features(const State& s) const { return encode(s.pos.x, s.pos.y); }

  std::vector<float> goal_features(const GoalVec& g) const {
    if (g.size() != 2) throw std::invalid_argument("point maze goals are 2D");
    return encode(g[0], g[1]);
  }

  std::array<double, 2> position(const State& s) const { return {s.pos.x, s.pos.y}; }

 private:
  // Coordinates rescaled to [-1, 1] over the arena.
  std::vector<float> encode(double x, double y) const {
    return {static_cast<float>(2.0 * x / spec_.arena.x_max - 1.0),
            static_cast<float>(2.0 * y / spec_.arena.y_max - 1.0)};
  }

  PointMazeConfig cfg_;
  GoalTaskSpec spec_;
};

}  // namespace srl
