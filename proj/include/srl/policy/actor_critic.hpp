#pragma once

// Goal-conditioned actor pi(a | s, g) and anti-goal-aware critic V(s, g, anti).

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/core/rng.hpp"
#include "srl/env/task.hpp"
#include "srl/numerics/mlp.hpp"
#include "srl/policy/distributions.hpp"

namespace srl {

/// Raw head outputs turned into distribution parameters, plus the derivative
/// of log-prob and entropy with respect to the raw outputs.
struct HeadEval {
  double log_prob = 0.0;
  double entropy = 0.0;
  std::vector<float> dlogp;     // d log_prob / d raw head output
  std::vector<float> dentropy;  // d entropy / d raw head output
};

struct BetaHeadOutput {
  std::vector<double> alpha, beta;
};

/// softplus(x) + 1 keeps both shape parameters above 1 (unimodal).
inline BetaHeadOutput beta_parameters(std::span<const float> head, int dim) {
  if (static_cast<int>(head.size()) != 2 * dim) throw std::invalid_argument("beta head has wrong width");
  BetaHeadOutput out;
  for (int i = 0; i < dim; ++i) {
    if (!std::isfinite(head[i]) || !std::isfinite(head[dim + i]))
      throw std::runtime_error("policy head produced a non-finite output");
    out.alpha.push_back(softplus(head[i]) + 1.0);
    out.beta.push_back(softplus(head[dim + i]) + 1.0);
  }
  return out;
}

inline double action_to_unit(const ActionSpace& space, const Action& a, int i) {
  return (static_cast<double>(a.values[i]) - space.low[i]) / (space.high[i] - space.low[i]);
}

/// Log-prob and entropy of `action` under the head output, with gradients.
inline HeadEval evaluate_head(const ActionSpace& space, std::span<const float> head, const Action& action) {
  HeadEval ev;
  ev.dlogp.assign(head.size(), 0.0f);
  ev.dentropy.assign(head.size(), 0.0f);
  if (space.is_discrete()) {
    const CategoricalStats s = categorical_head_stats(head, action.index);
    ev.log_prob = s.log_prob;
    ev.entropy = s.entropy;
    for (std::size_t j = 0; j < head.size(); ++j) {
      ev.dlogp[j] = static_cast<float>(s.dlogp_dlogits[j]);
      ev.dentropy[j] = static_cast<float>(s.dentropy_dlogits[j]);
    }
    return ev;
  }
  const int dim = space.dim();
  const BetaHeadOutput p = beta_parameters(head, dim);
  for (int i = 0; i < dim; ++i) {
    const double z = std::clamp(action_to_unit(space, action, i), kBetaClamp, 1.0 - kBetaClamp);
    const BetaStats s = beta_head_stats(p.alpha[i], p.beta[i], z);
    const double log_width = std::log(static_cast<double>(space.high[i]) - space.low[i]);
    ev.log_prob += s.log_prob - log_width;
    ev.entropy += s.entropy + log_width;
    const double da = sigmoid(head[i]), db = sigmoid(head[dim + i]);
    ev.dlogp[i] = static_cast<float>(s.dlogp_dalpha * da);
    ev.dlogp[dim + i] = static_cast<float>(s.dlogp_dbeta * db);
    ev.dentropy[i] = static_cast<float>(s.dentropy_dalpha * da);
    ev.dentropy[dim + i] = static_cast<float>(s.dentropy_dbeta * db);
  }
  return ev;
}

struct SampledAction {
  Action action;
  double log_prob = 0.0;
  double entropy = 0.0;
};

inline std::vector<float> policy_input(std::span<const float> state, std::span<const float> goal) {
  std::vector<float> x(state.begin(), state.end());
  x.insert(x.end(), goal.begin(), goal.end());
  return x;
}

/// Samples from pi(. | s, g). Beta draws are clamped 1e-6 inside (0, 1) and
/// then shifted and scaled into the action box.
inline SampledAction policy_forward_sample(const nn::MlpParams& actor, const ActionSpace& space,
                                           std::span<const float> state, std::span<const float> goal,
                                           Rng& rng) {
  const auto x = policy_input(state, goal);
  const nn::Vector head = nn::mlp_apply(actor, x);
  const std::span<const float> h(head.data(), static_cast<std::size_t>(head.size()));
  SampledAction out;
  if (space.is_discrete()) {
    const CategoricalStats s = categorical_head_stats(h, 0);
    double u = rng.uniform(), acc = 0.0;
    int pick = space.count - 1;
    for (int j = 0; j < space.count; ++j) {
      acc += s.probs[j];
      if (u < acc) {
        pick = j;
        break;
      }
    }
    out.action = Action::discrete(pick);
  } else {
    const BetaHeadOutput p = beta_parameters(h, space.dim());
    std::vector<float> values;
    for (int i = 0; i < space.dim(); ++i) {
      const double z = std::clamp(rng.beta(p.alpha[i], p.beta[i]), kBetaClamp, 1.0 - kBetaClamp);
      values.push_back(static_cast<float>(space.low[i] + z * (space.high[i] - space.low[i])));
    }
    out.action = Action::continuous(std::move(values));
  }
  const HeadEval ev = evaluate_head(space, h, out.action);
  out.log_prob = ev.log_prob;
  out.entropy = ev.entropy;
  return out;
}

/// Deterministic action for evaluation: Beta mean or argmax.
inline Action greedy_action(const nn::MlpParams& actor, const ActionSpace& space,
                            std::span<const float> state, std::span<const float> goal) {
  const auto x = policy_input(state, goal);
  const nn::Vector head = nn::mlp_apply(actor, x);
  const std::span<const float> h(head.data(), static_cast<std::size_t>(head.size()));
  if (space.is_discrete()) {
    int best = 0;
    for (int j = 1; j < space.count; ++j)
      if (h[j] > h[best]) best = j;
    return Action::discrete(best);
  }
  const BetaHeadOutput p = beta_parameters(h, space.dim());
  std::vector<float> values;
  for (int i = 0; i < space.dim(); ++i) {
    const double z = p.alpha[i] / (p.alpha[i] + p.beta[i]);
    values.push_back(static_cast<float>(space.low[i] + z * (space.high[i] - space.low[i])));
  }
  return Action::continuous(std::move(values));
}

/// Critic inputs. Without an anti-goal the slot is zero-filled and the
/// trailing presence flag is 0, so every critic has one input layout:
/// [state | goal | anti-goal | flag].
struct CriticInput {
  std::span<const float> state;
  std::span<const float> goal;
  std::optional<std::span<const float>> anti_goal;
};

inline std::vector<float> encode_critic_input(const CriticInput& in) {
  std::vector<float> x(in.state.begin(), in.state.end());
  x.insert(x.end(), in.goal.begin(), in.goal.end());
  if (in.anti_goal) {
    if (in.anti_goal->size() != in.goal.size())
      throw std::invalid_argument("anti-goal and goal encodings differ in length");
    x.insert(x.end(), in.anti_goal->begin(), in.anti_goal->end());
    x.push_back(1.0f);
  } else {
    x.insert(x.end(), in.goal.size(), 0.0f);
    x.push_back(0.0f);
  }
  return x;
}

inline int critic_input_size(int state_dim, int goal_dim) { return state_dim + 2 * goal_dim + 1; }

inline double critic_value(const nn::MlpParams& critic, const CriticInput& in) {
  const auto x = encode_critic_input(in);
  if (static_cast<int>(x.size()) != critic.input_size())
    throw std::invalid_argument("critic expects " + std::to_string(critic.input_size()) +
                                " inputs, got " + std::to_string(x.size()));
  return nn::mlp_apply(critic, x)(0);
}

struct NetworkShape {
  std::vector<int> hidden{128, 128, 128};
  double actor_output_scale = 0.01;
};

/// Separate actor and critic bodies.
struct ActorCritic {
  ActionSpace space;
  int state_dim = 0;
  int goal_dim = 0;
  nn::MlpParams actor;
  nn::MlpParams critic;

  static ActorCritic create(const GoalTaskSpec& task, const NetworkShape& shape, Rng& rng) {
    ActorCritic ac;
    ac.space = task.action;
    ac.state_dim = task.state_feature_dim;
    ac.goal_dim = task.goal_feature_dim;
    std::vector<int> actor_sizes{ac.state_dim + ac.goal_dim};
    actor_sizes.insert(actor_sizes.end(), shape.hidden.begin(), shape.hidden.end());
    actor_sizes.push_back(task.action.head_size());
    std::vector<int> critic_sizes{critic_input_size(ac.state_dim, ac.goal_dim)};
    critic_sizes.insert(critic_sizes.end(), shape.hidden.begin(), shape.hidden.end());
    critic_sizes.push_back(1);
    ac.actor = nn::MlpParams::init(actor_sizes, rng, shape.actor_output_scale);
    ac.critic = nn::MlpParams::init(critic_sizes, rng);
    return ac;
  }
};

}  // namespace srl
