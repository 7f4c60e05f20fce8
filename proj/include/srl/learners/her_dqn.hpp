#pragma once

// Goal-conditioned DQN with hindsight relabeling, for discrete actions.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "srl/core/rng.hpp"
#include "srl/env/task.hpp"
#include "srl/numerics/adam.hpp"
#include "srl/numerics/mlp.hpp"
#include "srl/policy/actor_critic.hpp"
#include "srl/trajectory.hpp"

namespace srl {

enum class HerStrategy { final, future };

struct DqnHerConfig {
  std::size_t replay_capacity = 200000;
  int minibatches_per_update = 40;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double polyak = 0.95;
  double epsilon_greedy = 0.2;
  double gamma = 0.98;
  HerStrategy strategy = HerStrategy::future;
  int future_k = 4;
  double huber_delta = 1.0;
  double reward_scale = 1.0;
  double grad_clip = 5.0;

  void validate() const {
    if (replay_capacity < 1 || minibatches_per_update < 1 || batch_size < 1 || future_k < 1)
      throw std::invalid_argument("dqn sizes must be positive");
    if (!(polyak >= 0.0 && polyak <= 1.0)) throw std::invalid_argument("polyak must lie in [0, 1]");
    if (!(epsilon_greedy >= 0.0 && epsilon_greedy <= 1.0))
      throw std::invalid_argument("epsilon_greedy must lie in [0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("discount must lie in (0, 1]");
  }
};

struct ReplayTransition {
  std::vector<float> state;
  std::vector<float> goal_features;
  int action = 0;
  double reward = 0.0;
  std::vector<float> next_state;
  bool done = false;
};

/// Per-step shaped reward: 1 inside the success radius, -d(m(s'), g) outside.
inline double step_shaped_reward(const GoalTaskSpec& task, std::span<const float> achieved,
                                 std::span<const float> goal) {
  const double d = task_distance(task, achieved, goal);
  return d <= task.threshold ? 1.0 : -d;
}

/// Transitions of `t` against its own goal.
inline std::vector<ReplayTransition> episode_transitions(const Trajectory& t, const GoalTaskSpec& task) {
  std::vector<ReplayTransition> out;
  out.reserve(t.length());
  for (const auto& s : t.steps) {
    const double r = step_shaped_reward(task, s.next_achieved, t.goal);
    out.push_back({s.state, t.goal_features, s.action.index, r, s.next_state, r == 1.0});
  }
  return out;
}

/// Hindsight copies of `t` with substituted goals. final: one copy against
/// g' = m(s_T). future: for each step t, k goals m(s'_j) with j drawn
/// uniformly from [t, T). `goal_features` maps a goal point to its encoding.
template <class GoalFeatures>
std::vector<ReplayTransition> her_relabel(const Trajectory& t, const GoalTaskSpec& task, HerStrategy strategy,
                                          int k, Rng& rng, GoalFeatures&& goal_features) {
  std::vector<ReplayTransition> out;
  const std::size_t n = t.length();
  auto emit = [&](std::size_t i, const GoalVec& g, const std::vector<float>& gf) {
    const Step& s = t.steps[i];
    const double r = step_shaped_reward(task, s.next_achieved, g);
    out.push_back({s.state, gf, s.action.index, r, s.next_state, r == 1.0});
  };
  if (strategy == HerStrategy::final) {
    if (n == 0) return out;
    const GoalVec& g = t.steps.back().next_achieved;
    const std::vector<float> gf = goal_features(g);
    for (std::size_t i = 0; i < n; ++i) emit(i, g, gf);
    return out;
  }
  out.reserve(n * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const std::size_t future = i + static_cast<std::size_t>(rng.below(n - i));
      const GoalVec& g = t.steps[future].next_achieved;
      emit(i, g, goal_features(g));
    }
  }
  return out;
}

/// Fixed-capacity ring buffer; the oldest entries are overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  void add(ReplayTransition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayTransition& operator[](std::size_t i) const { return data_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ReplayTransition> data_;
};

struct DqnLearner {
  nn::MlpParams q;
  nn::MlpParams target;
  nn::AdamState opt;

  static DqnLearner create(int state_dim, int goal_dim, int actions, const std::vector<int>& hidden,
                           const DqnHerConfig& cfg, Rng& rng) {
    std::vector<int> sizes{state_dim + goal_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(actions);
    DqnLearner l;
    l.q = nn::MlpParams::init(sizes, rng);
    l.target = l.q;
    l.target.touch();
    nn::AdamConfig a;
    a.learning_rate = cfg.learning_rate;
    a.lr_decay = 1.0;
    l.opt = nn::AdamState(l.q, a);
    return l;
  }
};

inline std::vector<float> q_input(std::span<const float> state, std::span<const float> goal) {
  std::vector<float> x(state.begin(), state.end());
  x.insert(x.end(), goal.begin(), goal.end());
  return x;
}

inline int q_argmax(const nn::MlpParams& q, std::span<const float> state, std::span<const float> goal) {
  const nn::Vector v = nn::mlp_apply(q, q_input(state, goal));
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

/// Epsilon-greedy behaviour action.
inline int dqn_behaviour_action(const nn::MlpParams& q, std::span<const float> state,
                                std::span<const float> goal, double epsilon, int actions, Rng& rng) {
  if (rng.bernoulli(epsilon)) return static_cast<int>(rng.below(static_cast<std::uint64_t>(actions)));
  return q_argmax(q, state, goal);
}

/// Rollout policy view of a Q network; greedy when epsilon is 0.
struct QPolicy {
  const nn::MlpParams* q = nullptr;
  double epsilon = 0.0;

  SampledAction act(std::span<const float> state, std::span<const float> goal, Rng& rng) const {
    SampledAction s;
    s.action = Action::discrete(dqn_behaviour_action(*q, state, goal, epsilon, q->output_size(), rng));
    return s;
  }
};

/// target <- polyak * target + (1 - polyak) * q.
inline void polyak_update(nn::MlpParams& target, const nn::MlpParams& q, double polyak) {
  const auto p = static_cast<float>(polyak);
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weights[l] = p * target.weights[l] + (1.0f - p) * q.weights[l];
    target.biases[l] = p * target.biases[l] + (1.0f - p) * q.biases[l];
  }
  target.touch();
}

struct DqnStats {
  double td_loss = 0.0;
  int steps = 0;
  bool skipped = false;
};

/// One update pass: minibatches of one-step Huber TD regression against
/// the target network, then a polyak step on the target. A replay holding
/// fewer than batch_size entries is skipped.
inline DqnStats dqn_update(const ReplayBuffer& replay, DqnLearner& l, const DqnHerConfig& cfg, Rng& rng) {
  cfg.validate();
  DqnStats stats;
  if (replay.size() < static_cast<std::size_t>(cfg.batch_size)) {
    stats.skipped = true;
    return stats;
  }
  const auto n = static_cast<Eigen::Index>(cfg.batch_size);
  const int in_dim = l.q.input_size();
  for (int b = 0; b < cfg.minibatches_per_update; ++b) {
    nn::Matrix x(in_dim, n), xn(in_dim, n);
    std::vector<const ReplayTransition*> picks(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& t = replay[rng.below(replay.size())];
      picks[static_cast<std::size_t>(j)] = &t;
      const auto sd = static_cast<Eigen::Index>(t.state.size());
      const auto gd = static_cast<Eigen::Index>(t.goal_features.size());
      x.col(j).head(sd) = Eigen::Map<const nn::Vector>(t.state.data(), sd);
      x.col(j).tail(gd) = Eigen::Map<const nn::Vector>(t.goal_features.data(), gd);
      xn.col(j).head(sd) = Eigen::Map<const nn::Vector>(t.next_state.data(), sd);
      xn.col(j).tail(gd) = Eigen::Map<const nn::Vector>(t.goal_features.data(), gd);
    }
    const nn::Matrix q_next = nn::mlp_apply_batch(l.target, xn);
    const auto cache = nn::mlp_forward_batch(l.q, std::move(x));
    nn::Matrix grad = nn::Matrix::Zero(cache.output().rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& t = *picks[static_cast<std::size_t>(j)];
      const double bootstrap = t.done ? 0.0 : cfg.gamma * static_cast<double>(q_next.col(j).maxCoeff());
      const double y = cfg.reward_scale * t.reward + bootstrap;
      const double err = static_cast<double>(cache.output()(t.action, j)) - y;
      const double a = std::abs(err);
      stats.td_loss += (a <= cfg.huber_delta ? 0.5 * err * err : cfg.huber_delta * (a - 0.5 * cfg.huber_delta)) /
                       static_cast<double>(n);
      grad(t.action, j) = static_cast<float>(std::clamp(err, -cfg.huber_delta, cfg.huber_delta) /
                                             static_cast<double>(n));
    }
    nn::GradBuffer g = nn::mlp_backward(l.q, cache, grad);
    nn::clipped_adam_step(l.q, g, l.opt, cfg.grad_clip);
    stats.steps += 1;
  }
  stats.td_loss /= std::max(1, stats.steps);
  polyak_update(l.target, l.q, cfg.polyak);
  return stats;
}

}  // namespace srl
