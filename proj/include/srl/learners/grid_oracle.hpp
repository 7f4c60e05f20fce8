#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "srl/env/task.hpp"
#include "srl/trajectory.hpp"

namespace srl {

struct GridOracleConfig {
  int divisions = 10;
  double coefficient = 0.01;  // 1 / divisions^2: full coverage earns 1

  void validate() const {
    if (divisions < 1) throw std::invalid_argument("grid oracle needs at least one division");
    if (!(coefficient > 0.0)) throw std::invalid_argument("grid oracle coefficient must be positive");
  }
};

inline int grid_oracle_cell(const Bounds2& arena, int divisions, double x, double y) {
  auto bin = [divisions](double v, double lo, double hi) {
    const int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * divisions));
    return std::clamp(i, 0, divisions - 1);
  };
  return bin(y, arena.y_min, arena.y_max) * divisions + bin(x, arena.x_min, arena.x_max);
}

/// coefficient x number of distinct arena cells the episode visited,
/// counting the start position.
inline double grid_oracle_bonus(const Trajectory& t, const GoalTaskSpec& task, const GridOracleConfig& cfg) {
  cfg.validate();
  if (!task.spatial) throw std::invalid_argument("grid oracle needs a spatial navigation task");
  std::unordered_set<int> cells;
  cells.insert(grid_oracle_cell(task.arena, cfg.divisions, t.start_position[0], t.start_position[1]));
  for (const auto& s : t.steps)
    cells.insert(grid_oracle_cell(task.arena, cfg.divisions, s.next_position[0], s.next_position[1]));
  return cfg.coefficient * static_cast<double>(cells.size());
}

}  // namespace srl
