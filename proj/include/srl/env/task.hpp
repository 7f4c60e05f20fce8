#pragma once

// Goal-reaching task vocabulary shared by every environment.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srl/core/rng.hpp"

namespace srl {

/// A point in goal space: 2D coordinates for spatial tasks, a flattened
/// 0/1 bitmap for the bit grid.
using GoalVec = std::vector<float>;

enum class DistanceKind { l2, l1, blockwise_mismatch };

inline double distance(DistanceKind kind, std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("distance: goal shapes differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  double acc = 0.0;
  switch (kind) {
    case DistanceKind::l2:
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
      }
      return std::sqrt(acc);
    case DistanceKind::l1:
      for (std::size_t i = 0; i < a.size(); ++i)
        acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
      return acc;
    case DistanceKind::blockwise_mismatch:
      for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] != b[i]) ? 1.0 : 0.0;
      return acc;
  }
  return acc;
}

struct ActionSpace {
  enum class Kind { continuous, discrete };
  Kind kind = Kind::continuous;
  std::vector<float> low, high;  // continuous bounds, one per dimension
  int count = 0;                 // number of discrete actions

  static ActionSpace box(std::vector<float> lo, std::vector<float> hi) {
    if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("box bounds malformed");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw std::invalid_argument("box bounds must satisfy low < high");
    return {Kind::continuous, std::move(lo), std::move(hi), 0};
  }
  static ActionSpace discrete(int n) {
    if (n < 1) throw std::invalid_argument("discrete action space needs at least one action");
    return {Kind::discrete, {}, {}, n};
  }

  bool is_discrete() const { return kind == Kind::discrete; }
  int dim() const { return is_discrete() ? 1 : static_cast<int>(low.size()); }
  /// Width of the policy head: 2 Beta parameters per dimension, or logits.
  int head_size() const { return is_discrete() ? count : 2 * static_cast<int>(low.size()); }
};

/// Continuous actions use `values`; discrete actions use `index`.
struct Action {
  std::vector<float> values;
  int index = -1;

  static Action continuous(std::vector<float> v) { return {std::move(v), -1}; }
  static Action discrete(int i) { return {{}, i}; }
  bool operator==(const Action&) const = default;
};

inline void validate_action(const ActionSpace& space, const Action& a) {
  if (space.is_discrete()) {
    if (a.index < 0 || a.index >= space.count)
      throw std::invalid_argument("discrete action " + std::to_string(a.index) + " out of range");
    return;
  }
  if (a.values.size() != space.low.size())
    throw std::invalid_argument("continuous action has wrong dimension");
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (!(a.values[i] >= space.low[i] && a.values[i] <= space.high[i]))
      throw std::invalid_argument("continuous action component " + std::to_string(i) +
                                  " out of range");
}

enum class GoalMap { identity, position, bitmap_channel };

struct Bounds2 {
  double x_min = 0, y_min = 0, x_max = 1, y_max = 1;
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

struct GoalTaskSpec {
  std::string name;
  int state_feature_dim = 0;
  int goal_feature_dim = 0;
  int goal_dim = 0;
  ActionSpace action;
  GoalMap goal_map = GoalMap::identity;
  DistanceKind distance = DistanceKind::l2;
  double threshold = 0.0;  // success radius delta
  int horizon = 1;         // T_max
  bool spatial = false;    // XY-navigation task (grid oracle, scatter plots)
  Bounds2 arena;

  void validate() const {
    if (!(threshold >= 0.0)) throw std::invalid_argument("task threshold must be non-negative");
    if (horizon < 1) throw std::invalid_argument("task horizon must be at least 1");
    if (goal_dim < 1 || state_feature_dim < 1 || goal_feature_dim < 1)
      throw std::invalid_argument("task dimensions must be positive");
  }
};

/// d(a, b) under the task's metric. Both arguments are goal-space points;
/// states are mapped through the environment's goal map before calling this.
inline double task_distance(const GoalTaskSpec& task, std::span<const float> a,
                            std::span<const float> b) {
  if (static_cast<int>(a.size()) != task.goal_dim || static_cast<int>(b.size()) != task.goal_dim)
    throw std::invalid_argument("task_distance: expected goal dimension " +
                                std::to_string(task.goal_dim));
  return distance(task.distance, a, b);
}

template <class State>
struct EpisodeInit {
  State start;
  GoalVec goal;
  std::uint64_t seed = 0;
};

/// What the rollout machinery needs from an environment. Environments are
/// immutable; the state is passed in and returned by value.
template <class E>
concept GoalEnvironment = requires(const E& env, const typename E::State& s, const Action& a,
                                   const GoalVec& g, Rng& rng) {
  typename E::State;
  { env.spec() } -> std::same_as<const GoalTaskSpec&>;
  { env.sample_init(rng) } -> std::same_as<EpisodeInit<typename E::State>>;
  { env.sample_start(rng) } -> std::same_as<typename E::State>;
  { env.transition(s, a) } -> std::same_as<typename E::State>;
  { env.achieved_goal(s) } -> std::same_as<GoalVec>;
  { env.features(s) } -> std::same_as<std::vector<float>>;
  { env.goal_features(g) } -> std::same_as<std::vector<float>>;
  { env.position(s) } -> std::same_as<std::array<double, 2>>;
};

template <class State>
struct StepOutcome {
  State next;
  bool done = false;
  bool success = false;
};

/// Applies `action` from `state` at step index t (0-based). The episode is
/// done when the goal is within the threshold or t + 1 reaches the horizon.
template <GoalEnvironment E>
StepOutcome<typename E::State> env_step(const E& env, const typename E::State& state,
                                        const Action& action, const GoalVec& goal, int t) {
  validate_action(env.spec().action, action);
  StepOutcome<typename E::State> out;
  out.next = env.transition(state, action);
  const GoalVec achieved = env.achieved_goal(out.next);
  out.success = task_distance(env.spec(), achieved, goal) <= env.spec().threshold;
  out.done = out.success || t + 1 >= env.spec().horizon;
  return out;
}

}  // namespace srl
