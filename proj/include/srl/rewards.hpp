#pragma once

// Terminal-state rewards for goal-reaching tasks.
//
//   sparse:          1 if d(s, g) <= delta, else 0
//   naive shaped:    1 if d(s, g) <= delta, else -d(s, g)
//   self-balancing:  1 if d(s, g) <= delta, else min(0, d(s, anti) - d(s, g))

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>

#include "srl/env/task.hpp"
#include "srl/trajectory.hpp"

namespace srl {

struct RewardContext {
  const GoalTaskSpec* task = nullptr;
  GoalVec goal;
  std::optional<GoalVec> anti_goal;

  double threshold() const { return task->threshold; }
};

inline bool is_success(const GoalTaskSpec& task, std::span<const float> achieved,
                       std::span<const float> goal) {
  return task_distance(task, achieved, goal) <= task.threshold;
}

/// `achieved` is m(s) for the terminal state s.
inline double sparse_reward(std::span<const float> achieved, const RewardContext& ctx) {
  return is_success(*ctx.task, achieved, ctx.goal) ? 1.0 : 0.0;
}

inline double naive_shaped_reward(std::span<const float> achieved, const RewardContext& ctx) {
  const double d = task_distance(*ctx.task, achieved, ctx.goal);
  return d <= ctx.threshold() ? 1.0 : -d;
}

inline double self_balancing_reward(std::span<const float> achieved, const RewardContext& ctx) {
  if (!ctx.anti_goal) throw std::invalid_argument("self-balancing reward needs an anti-goal");
  const double d_goal = task_distance(*ctx.task, achieved, ctx.goal);
  if (d_goal <= ctx.threshold()) return 1.0;
  const double d_anti = task_distance(*ctx.task, achieved, *ctx.anti_goal);
  return std::min(0.0, d_anti - d_goal);
}

/// Mutual relabeling: each sibling's terminal state is the other's
/// anti-goal, and each gets the self-balancing reward against it as its
/// end-of-episode reward. With `strict_pairing`, siblings must share both
/// start and goal; otherwise only the goal.
inline void relabel_sibling_pair(SiblingPair& pair, const GoalTaskSpec& task,
                                 bool strict_pairing = true) {
  auto& c = pair.closer;
  auto& f = pair.farther;
  if (c.steps.empty() || f.steps.empty())
    throw std::invalid_argument("relabel_sibling_pair: both rollouts must be complete");
  if (c.goal != f.goal) throw std::invalid_argument("relabel_sibling_pair: siblings have different goals");
  if (strict_pairing && c.start_state != f.start_state)
    throw std::invalid_argument("relabel_sibling_pair: siblings have different start states");

  auto assign = [&task](Trajectory& self, const Trajectory& sibling) {
    RewardContext ctx{&task, self.goal, sibling.terminal};
    self.terminal_reward = self_balancing_reward(self.terminal, ctx);
    self.anti_goal = sibling.terminal;
    self.anti_goal_features = sibling.terminal_features;
  };
  assign(f, c);
  assign(c, f);
}

}  // namespace srl
