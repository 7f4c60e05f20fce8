#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "srl/env/task.hpp"

namespace srl {

/// One transition, stored in the encodings the networks consume.
struct Step {
  std::vector<float> state;       // features(s_t)
  Action action;
  std::vector<float> next_state;  // features(s'_t)
  GoalVec next_achieved;          // m(s'_t)
  std::array<double, 2> next_position{};
  double log_prob = 0.0;          // log pi(a_t | s_t, g) at sampling time
};

struct Trajectory {
  std::vector<Step> steps;
  GoalVec goal;
  std::vector<float> goal_features;
  std::vector<float> start_state;  // features(s_0)
  std::array<double, 2> start_position{};
  GoalVec terminal;                      // m(s_T)
  std::vector<float> terminal_features;  // goal_features(m(s_T))
  std::array<double, 2> terminal_position{};
  double terminal_distance = 0.0;        // d(m(s_T), g)
  bool success = false;
  std::uint64_t init_seed = 0;

  // Filled in by relabeling.
  std::optional<GoalVec> anti_goal;
  std::optional<std::vector<float>> anti_goal_features;
  std::optional<double> terminal_reward;

  std::size_t length() const { return steps.size(); }
};

struct SiblingPair {
  Trajectory closer;   // tau^c
  Trajectory farther;  // tau^f
};

}  // namespace srl
