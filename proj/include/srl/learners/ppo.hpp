#pragma once

// On-policy actor-critic updates: clipped PPO and single-pass A2C.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "srl/core/rng.hpp"
#include "srl/learners/gae.hpp"
#include "srl/numerics/adam.hpp"
#include "srl/numerics/mlp.hpp"
#include "srl/policy/actor_critic.hpp"
#include "srl/trajectory.hpp"

namespace srl {

struct PpoConfig {
  double clip_ratio = 0.2;
  int epochs_per_update = 4;
  int minibatches_per_epoch = 4;
  double entropy_coef = 0.025;
  double gae_lambda = 0.98;
  double gamma = 1.0;
  bool bootstrap_value = false;
  double learning_rate = 1e-3;
  double lr_decay = 0.999;
  double value_coef = 0.5;
  double grad_clip = 5.0;
  bool normalize_advantages = true;

  void validate() const {
    if (!(clip_ratio > 0.0)) throw std::invalid_argument("clip_ratio must be positive");
    if (epochs_per_update < 1 || minibatches_per_epoch < 1)
      throw std::invalid_argument("epochs and minibatches must be positive");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("gae_lambda must lie in [0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("discount must lie in (0, 1]");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  }

  nn::AdamConfig adam() const {
    nn::AdamConfig a;
    a.learning_rate = learning_rate;
    a.lr_decay = lr_decay;
    a.grad_clip = grad_clip;
    return a;
  }
};

/// Actor-critic networks together with their optimizers.
struct PolicyLearner {
  ActorCritic net;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;

  static PolicyLearner create(const GoalTaskSpec& task, const NetworkShape& shape, const PpoConfig& cfg,
                              Rng& rng) {
    PolicyLearner l;
    l.net = ActorCritic::create(task, shape, rng);
    l.actor_opt = nn::AdamState(l.net.actor, cfg.adam());
    l.critic_opt = nn::AdamState(l.net.critic, cfg.adam());
    return l;
  }
};

/// A trajectory paired with the per-step rewards the learner should see.
/// `bootstrap_final` asks for V(s_T) as the tail value (time-limit cut).
struct RewardedEpisode {
  const Trajectory* trajectory = nullptr;
  std::vector<double> rewards;
  bool use_anti_goal = false;
  bool bootstrap_final = false;
};

/// Rewards that are zero everywhere except `terminal` on the last step.
inline std::vector<double> terminal_rewards(const Trajectory& t, double terminal) {
  std::vector<double> r(t.length(), 0.0);
  if (!r.empty()) r.back() = terminal;
  return r;
}

struct PolicySample {
  std::vector<float> policy_input;
  std::vector<float> critic_input;
  Action action;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

inline std::vector<float> critic_features(const Trajectory& t, std::span<const float> state, bool use_anti_goal) {
  CriticInput in{state, t.goal_features, std::nullopt};
  if (use_anti_goal) {
    if (!t.anti_goal_features) throw std::invalid_argument("critic asked for an anti-goal the trajectory lacks");
    in.anti_goal = std::span<const float>(*t.anti_goal_features);
  }
  return encode_critic_input(in);
}

/// Flattens episodes into samples, evaluating the critic to get GAE
/// advantages and returns.
inline std::vector<PolicySample> build_policy_batch(const std::vector<RewardedEpisode>& episodes,
                                                    const nn::MlpParams& critic, const PpoConfig& cfg) {
  std::vector<PolicySample> out;
  for (const auto& ep : episodes) {
    const Trajectory& t = *ep.trajectory;
    if (ep.rewards.size() != t.length()) throw std::invalid_argument("reward count differs from episode length");
    if (t.steps.empty()) continue;
    std::vector<std::vector<float>> cols;
    cols.reserve(t.length() + 1);
    for (const auto& s : t.steps) cols.push_back(critic_features(t, s.state, ep.use_anti_goal));
    cols.push_back(critic_features(t, t.steps.back().next_state, ep.use_anti_goal));
    const nn::Matrix v = nn::mlp_apply_batch(critic, nn::stack_columns(cols));
    std::vector<double> values(t.length());
    for (std::size_t i = 0; i < t.length(); ++i) values[i] = v(0, static_cast<Eigen::Index>(i));
    const double tail = v(0, static_cast<Eigen::Index>(t.length()));
    const bool boot = cfg.bootstrap_value && ep.bootstrap_final;
    const GaeResult g = compute_gae(ep.rewards, values, cfg.gamma, cfg.gae_lambda, boot, tail);
    for (std::size_t i = 0; i < t.length(); ++i) {
      PolicySample s;
      s.policy_input = policy_input(t.steps[i].state, t.goal_features);
      s.critic_input = std::move(cols[i]);
      s.action = t.steps[i].action;
      s.old_log_prob = t.steps[i].log_prob;
      s.advantage = g.advantages[i];
      s.ret = g.returns[i];
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Rescales advantages to zero mean and unit standard deviation (population
/// std). Batches of one are only centred.
inline void normalize_advantages(std::vector<PolicySample>& batch) {
  if (batch.empty()) return;
  double mean = 0.0;
  for (const auto& s : batch) mean += s.advantage;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
  var /= static_cast<double>(batch.size());
  const double sd = std::sqrt(var);
  for (auto& s : batch) {
    s.advantage -= mean;
    if (batch.size() > 1 && sd > 1e-12) s.advantage /= sd;
  }
}

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::size_t samples = 0;
  int optimizer_steps = 0;
  int skipped_steps = 0;
  bool empty = false;
};

namespace detail {

/// Gradients of one minibatch; `clipped` selects the PPO surrogate,
/// otherwise the plain policy-gradient objective A * log pi.
inline void policy_minibatch_step(PolicyLearner& l, const std::vector<PolicySample>& batch,
                                  std::span<const std::size_t> idx, const PpoConfig& cfg, bool clipped,
                                  PpoStats& stats) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  const ActionSpace& space = l.net.space;
  nn::Matrix x(l.net.actor.input_size(), n), c(l.net.critic.input_size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& s = batch[idx[static_cast<std::size_t>(j)]];
    x.col(j) = Eigen::Map<const nn::Vector>(s.policy_input.data(), x.rows());
    c.col(j) = Eigen::Map<const nn::Vector>(s.critic_input.data(), c.rows());
  }

  const auto actor_cache = nn::mlp_forward_batch(l.net.actor, std::move(x));
  const nn::Matrix& head = actor_cache.output();
  nn::Matrix head_grad = nn::Matrix::Zero(head.rows(), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& s = batch[idx[static_cast<std::size_t>(j)]];
    const std::span<const float> h(head.col(j).data(), static_cast<std::size_t>(head.rows()));
    const HeadEval ev = evaluate_head(space, h, s.action);
    const double log_ratio = ev.log_prob - s.old_log_prob;
    const double ratio = std::exp(std::clamp(log_ratio, -30.0, 30.0));
    double weight = s.advantage;  // d objective / d log pi
    if (clipped) {
      const double lo = 1.0 - cfg.clip_ratio, hi = 1.0 + cfg.clip_ratio;
      const double clipped_ratio = std::clamp(ratio, lo, hi);
      const bool inactive = (s.advantage > 0.0 && ratio > hi) || (s.advantage < 0.0 && ratio < lo);
      weight = inactive ? 0.0 : s.advantage * ratio;
      stats.policy_loss -= std::min(ratio * s.advantage, clipped_ratio * s.advantage) * inv_n;
      if (ratio < lo || ratio > hi) stats.clip_fraction += inv_n;
    } else {
      stats.policy_loss -= s.advantage * ev.log_prob * inv_n;
    }
    stats.entropy += ev.entropy * inv_n;
    stats.approx_kl += (ratio - 1.0 - log_ratio) * inv_n;
    for (Eigen::Index k = 0; k < head.rows(); ++k)
      head_grad(k, j) = static_cast<float>(
          -inv_n * (weight * ev.dlogp[static_cast<std::size_t>(k)] +
                    cfg.entropy_coef * ev.dentropy[static_cast<std::size_t>(k)]));
  }
  nn::GradBuffer actor_grad = nn::mlp_backward(l.net.actor, actor_cache, head_grad);

  const auto critic_cache = nn::mlp_forward_batch(l.net.critic, std::move(c));
  nn::Matrix value_grad(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double err = critic_cache.output()(0, j) - batch[idx[static_cast<std::size_t>(j)]].ret;
    stats.value_loss += cfg.value_coef * err * err * inv_n;
    value_grad(0, j) = static_cast<float>(2.0 * cfg.value_coef * err * inv_n);
  }
  nn::GradBuffer critic_grad = nn::mlp_backward(l.net.critic, critic_cache, value_grad);

  const auto ra = nn::clipped_adam_step(l.net.actor, actor_grad, l.actor_opt, cfg.grad_clip);
  const auto rc = nn::clipped_adam_step(l.net.critic, critic_grad, l.critic_opt, cfg.grad_clip);
  stats.optimizer_steps += 1;
  if (!ra.applied || !rc.applied) stats.skipped_steps += 1;
}

inline void finish_stats(PpoStats& s, int passes) {
  if (passes <= 0) return;
  s.policy_loss /= passes;
  s.value_loss /= passes;
  s.entropy /= passes;
  s.clip_fraction /= passes;
  s.approx_kl /= passes;
}

}  // namespace detail

/// Clipped-surrogate PPO over `batch`: epochs x minibatches, each epoch a
/// fresh shuffled partition. Minibatch sizes follow the batch size. An empty
/// batch is a no-op (stats.empty set). Learning rates decay once per call.
inline PpoStats ppo_update(std::vector<PolicySample> batch, PolicyLearner& l, const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  PpoStats stats;
  stats.samples = batch.size();
  if (batch.empty()) {
    stats.empty = true;
    return stats;
  }
  if (cfg.normalize_advantages) normalize_advantages(batch);
  const std::size_t n = batch.size();
  const std::size_t parts = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatches_per_epoch), n);
  std::vector<std::size_t> order(n);
  int passes = 0;
  for (int e = 0; e < cfg.epochs_per_update; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    for (std::size_t p = 0; p < parts; ++p) {
      const std::size_t begin = p * n / parts, end = (p + 1) * n / parts;
      detail::policy_minibatch_step(l, batch, std::span<const std::size_t>(order).subspan(begin, end - begin),
                                    cfg, true, stats);
      ++passes;
    }
  }
  detail::finish_stats(stats, passes);
  l.actor_opt.finish_update_pass();
  l.critic_opt.finish_update_pass();
  return stats;
}

/// One full-batch policy-gradient step with the critic as baseline.
/// REINFORCE is the same update with the critic frozen at zero.
inline PpoStats a2c_update(std::vector<PolicySample> batch, PolicyLearner& l, const PpoConfig& cfg) {
  cfg.validate();
  PpoStats stats;
  stats.samples = batch.size();
  if (batch.empty()) {
    stats.empty = true;
    return stats;
  }
  if (cfg.normalize_advantages) normalize_advantages(batch);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  detail::policy_minibatch_step(l, batch, order, cfg, false, stats);
  l.actor_opt.finish_update_pass();
  l.critic_opt.finish_update_pass();
  return stats;
}

}  // namespace srl
