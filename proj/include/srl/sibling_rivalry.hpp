#pragma once

// Paired rollout collection with mutual anti-goal relabeling and the
// epsilon inclusion rule for the closer sibling.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "srl/core/parallel.hpp"
#include "srl/core/rng.hpp"
#include "srl/env/task.hpp"
#include "srl/numerics/mlp.hpp"
#include "srl/policy/actor_critic.hpp"
#include "srl/rewards.hpp"
#include "srl/trajectory.hpp"

namespace srl {

/// Read-only view of an actor used during collection.
struct ActorPolicy {
  const nn::MlpParams* actor = nullptr;
  ActionSpace space;
  bool greedy = false;

  SampledAction act(std::span<const float> state, std::span<const float> goal, Rng& rng) const {
    if (!greedy) return policy_forward_sample(*actor, space, state, goal, rng);
    SampledAction s;
    s.action = greedy_action(*actor, space, state, goal);
    return s;
  }
};

struct SrConfig {
  double epsilon = 5.0;  // may be +infinity
  bool independent_start = false;
  int pairs_per_update = 4;

  void validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("inclusion threshold epsilon must be >= 0");
    if (pairs_per_update < 1) throw std::invalid_argument("pairs_per_update must be positive");
  }
};

/// Runs one episode from `init` until success or the horizon. No reward is
/// attached; log-probs are those of the sampling-time policy. `Policy` is
/// anything with act(state, goal, rng) -> SampledAction.
template <class Policy, GoalEnvironment E>
Trajectory collect_rollout(const Policy& policy, const E& env,
                           const EpisodeInit<typename E::State>& init, Rng& rng) {
  const GoalTaskSpec& task = env.spec();
  Trajectory tr;
  tr.goal = init.goal;
  tr.goal_features = env.goal_features(init.goal);
  tr.init_seed = init.seed;
  tr.start_state = env.features(init.start);
  tr.start_position = env.position(init.start);
  tr.steps.reserve(static_cast<std::size_t>(task.horizon));

  typename E::State s = init.start;
  std::vector<float> feat = tr.start_state;
  for (int t = 0; t < task.horizon; ++t) {
    SampledAction sa = policy.act(feat, tr.goal_features, rng);
    auto out = env_step(env, s, sa.action, tr.goal, t);
    Step step;
    step.state = std::move(feat);
    step.action = std::move(sa.action);
    step.next_state = env.features(out.next);
    step.next_achieved = env.achieved_goal(out.next);
    step.next_position = env.position(out.next);
    step.log_prob = sa.log_prob;
    feat = step.next_state;
    tr.steps.push_back(std::move(step));
    s = std::move(out.next);
    if (out.done) break;
  }
  tr.terminal = env.achieved_goal(s);
  tr.terminal_features = env.goal_features(tr.terminal);
  tr.terminal_position = env.position(s);
  tr.terminal_distance = task_distance(task, tr.terminal, tr.goal);
  tr.success = tr.terminal_distance <= task.threshold;
  return tr;
}

/// Two rollouts for one sampled (s0, g); in independent-start mode only the
/// goal is shared and the second start is drawn afresh.
template <GoalEnvironment E>
std::pair<Trajectory, Trajectory> collect_sibling_pair(const ActorPolicy& policy, const E& env, Rng& rng,
                                                       const SrConfig& cfg) {
  const auto init = env.sample_init(rng);
  Trajectory a = collect_rollout(policy, env, init, rng);
  auto sibling_init = init;
  if (cfg.independent_start) sibling_init.start = env.sample_start(rng);
  Trajectory b = collect_rollout(policy, env, sibling_init, rng);
  return {std::move(a), std::move(b)};
}

/// Strictly smaller terminal distance is closer; on a tie `a` is closer.
inline SiblingPair classify_siblings(Trajectory a, Trajectory b) {
  if (a.goal != b.goal) throw std::invalid_argument("classify_siblings: siblings have different goals");
  if (b.terminal_distance < a.terminal_distance) return {std::move(b), std::move(a)};
  return {std::move(a), std::move(b)};
}

enum class Inclusion { both, farther_only };

/// The farther sibling is always used. The closer one joins it when it
/// reached the goal or ended within epsilon of its sibling.
inline Inclusion inclusion_rule(const SiblingPair& pair, const SrConfig& cfg, const GoalTaskSpec& task) {
  if (pair.closer.success) return Inclusion::both;
  if (std::isinf(cfg.epsilon)) return Inclusion::both;
  const double gap = task_distance(task, pair.closer.terminal, pair.farther.terminal);
  return gap <= cfg.epsilon ? Inclusion::both : Inclusion::farther_only;
}

enum class SiblingRole { closer, farther, single };

/// Trajectories handed to the learner for one update; rebuilt every iteration.
struct TransitionBuffer {
  std::vector<Trajectory> trajectories;
  std::vector<SiblingRole> roles;

  void clear() {
    trajectories.clear();
    roles.clear();
  }
  void add(Trajectory t, SiblingRole role) {
    if (!t.terminal_reward) throw std::invalid_argument("buffer entries must carry a relabeled reward");
    trajectories.push_back(std::move(t));
    roles.push_back(role);
  }
  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.length();
    return n;
  }
};

/// Per-pair bookkeeping kept alongside the buffer.
struct PairRecord {
  double sibling_distance = 0.0;  // d(m(s_T^c), m(s_T^f))
  double closer_naive_reward = 0.0;
  double farther_naive_reward = 0.0;
  bool closer_included = false;
  bool any_success = false;
  std::size_t env_steps = 0;
};

struct SrIteration {
  TransitionBuffer buffer;
  std::vector<PairRecord> pairs;
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  std::size_t successes = 0;     // over both siblings of every pair
  double distance_sum = 0.0;     // of d(m(s_T), g), same population
};

/// One outer iteration of collection: M sibling pairs, each relabeled,
/// classified and filtered into the buffer. Pair i draws from its own RNG
/// stream derived from `rng`, and results are merged in index order, so the
/// buffer is identical for any worker count.
template <GoalEnvironment E>
SrIteration sr_collect_iteration(const ActorPolicy& policy, const E& env, const SrConfig& cfg, Rng& rng,
                                 int workers = 1) {
  cfg.validate();
  const std::uint64_t base = rng();
  const auto m = static_cast<std::size_t>(cfg.pairs_per_update);
  std::vector<SiblingPair> pairs(m);
  parallel_for(m, workers, [&](std::size_t i) {
    Rng pair_rng = Rng::stream(base, {static_cast<std::uint64_t>(Stream::collect), i});
    auto [a, b] = collect_sibling_pair(policy, env, pair_rng, cfg);
    pairs[i] = classify_siblings(std::move(a), std::move(b));
    relabel_sibling_pair(pairs[i], env.spec(), !cfg.independent_start);
  });

  SrIteration out;
  const GoalTaskSpec& task = env.spec();
  for (auto& pair : pairs) {
    PairRecord rec;
    rec.sibling_distance = task_distance(task, pair.closer.terminal, pair.farther.terminal);
    RewardContext ctx{&task, pair.closer.goal, std::nullopt};
    rec.closer_naive_reward = naive_shaped_reward(pair.closer.terminal, ctx);
    rec.farther_naive_reward = naive_shaped_reward(pair.farther.terminal, ctx);
    rec.any_success = pair.closer.success || pair.farther.success;
    rec.env_steps = pair.closer.length() + pair.farther.length();
    rec.closer_included = inclusion_rule(pair, cfg, task) == Inclusion::both;
    out.env_steps += rec.env_steps;
    out.episodes += 2;
    out.successes += static_cast<std::size_t>(pair.closer.success) + static_cast<std::size_t>(pair.farther.success);
    out.distance_sum += pair.closer.terminal_distance + pair.farther.terminal_distance;
    out.buffer.add(std::move(pair.farther), SiblingRole::farther);
    if (rec.closer_included) out.buffer.add(std::move(pair.closer), SiblingRole::closer);
    out.pairs.push_back(rec);
  }
  return out;
}

/// Independent rollouts for the non-sibling learners, one RNG stream each.
template <class Policy, GoalEnvironment E>
std::vector<Trajectory> collect_rollouts(const Policy& policy, const E& env, std::size_t n, Rng& rng,
                                         int workers = 1) {
  const std::uint64_t base = rng();
  std::vector<Trajectory> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    Rng ep_rng = Rng::stream(base, {static_cast<std::uint64_t>(Stream::collect), i});
    const auto init = env.sample_init(ep_rng);
    out[i] = collect_rollout(policy, env, init, ep_rng);
  });
  return out;
}

}  // namespace srl
